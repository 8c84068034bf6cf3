#pragma once

#include <cstddef>

// Raw numeric kernels behind the tensor and layer operations.
//
// The top-level functions are the production versions: OpenMP parallel over
// independent output rows (or batch elements), with inner loops written as
// contiguous axpy updates so they vectorize without reassociating sums.
// Each output element is accumulated in a fixed order, so results are
// bitwise identical for any thread count.
//
// kernels::serial holds straightforward textbook loops with the same
// signatures. They are kept as the reference the tests and the benchmark
// compare against; they agree with the parallel versions to rounding.
//
// All matrices are row-major with explicit leading dimensions. `accumulate`
// selects C += ... instead of C = ....

namespace dwrpm::kernels {

/// C[m x n] (+)= A[m x k] * B[k x n]
void gemm(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

/// C[m x n] (+)= A[r x m]^T * B[r x n]
void gemm_tn(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t r, std::size_t m, std::size_t n, bool accumulate);

/// C[m x n] (+)= A[m x k] * B[n x k]^T
void gemm_nt(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate);

/// Valid 1-D cross-correlation.
///
/// x:      [batch x len x channels]
/// kernels:[filters x channels x klen]
/// out:    [batch x (len - klen + 1) x filters]
/// out[b,t,f] = bias[f] + sum_{c,j} kernels[f,c,j] * x[b, t + j, c]
void conv1d_forward(const double* x, const double* kernels, const double* bias, double* out,
                    std::size_t batch, std::size_t len, std::size_t channels, std::size_t klen,
                    std::size_t filters);

/// Gradients of conv1d_forward. grad_x may be null when the input gradient
/// is not needed. Outputs are overwritten.
void conv1d_backward(const double* x, const double* kernels, const double* grad_out,
                     double* grad_x, double* grad_kernels, double* grad_bias, std::size_t batch,
                     std::size_t len, std::size_t channels, std::size_t klen,
                     std::size_t filters);

namespace serial {

void gemm(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t r, std::size_t m, std::size_t n, bool accumulate);
void gemm_nt(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void conv1d_forward(const double* x, const double* kernels, const double* bias, double* out,
                    std::size_t batch, std::size_t len, std::size_t channels, std::size_t klen,
                    std::size_t filters);
void conv1d_backward(const double* x, const double* kernels, const double* grad_out,
                     double* grad_x, double* grad_kernels, double* grad_bias, std::size_t batch,
                     std::size_t len, std::size_t channels, std::size_t klen,
                     std::size_t filters);

}  // namespace serial
}  // namespace dwrpm::kernels
