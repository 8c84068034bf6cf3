#include "dwrpm/kernels.hpp"

#include <algorithm>
#include <vector>

namespace dwrpm::kernels {
namespace {

// Below this many multiply-adds the OpenMP fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

// Rows [row_begin, row_end) of C (+)= A * B. Zero entries of A are skipped;
// activations after ReLU and dry-day rainfall inputs are mostly zero.
inline void gemm_rows(const double* a, std::size_t lda, const double* b, std::size_t ldb,
                      double* c, std::size_t ldc, std::size_t row_begin, std::size_t row_end,
                      std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = row_begin; i < row_end; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// kernels[f][c][j] -> patch-major matrix [(klen*channels) x filters].
std::vector<double> patch_weights(const double* kernels, std::size_t channels, std::size_t klen,
                                  std::size_t filters) {
  std::vector<double> wm(klen * channels * filters);
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < klen; ++j)
        wm[(j * channels + c) * filters + f] = kernels[(f * channels + c) * klen + j];
  return wm;
}

}  // namespace

void gemm(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto row = static_cast<std::size_t>(i);
    gemm_rows(a, lda, b, ldb, c, ldc, row, row + 1, k, n, accumulate);
  }
}

void gemm_tn(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t r, std::size_t m, std::size_t n, bool accumulate) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * r * n > kParallelWork)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    for (std::size_t p = 0; p < r; ++p) {
      const double av = a[p * lda + i];
      if (av == 0.0) continue;
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  // Dot-product form does not vectorize without reassociation, so transpose
  // B once and fall back to the axpy form.
  std::vector<double> bt(k * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * ldb + p];
  gemm(a, lda, bt.data(), n, c, ldc, m, k, n, accumulate);
}

void conv1d_forward(const double* x, const double* kernels, const double* bias, double* out,
                    std::size_t batch, std::size_t len, std::size_t channels, std::size_t klen,
                    std::size_t filters) {
  const std::size_t out_len = len - klen + 1;
  const std::size_t patch = klen * channels;
  const std::vector<double> wm = patch_weights(kernels, channels, klen, filters);
  const auto nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * out_len * patch * filters > kParallelWork)
  for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    double* ob = out + b * out_len * filters;
    for (std::size_t t = 0; t < out_len; ++t) std::copy(bias, bias + filters, ob + t * filters);
    // Row t of the patch matrix starts at x[b, t, 0] and spans klen*channels
    // contiguous values, so consecutive rows overlap with stride `channels`.
    gemm_rows(x + b * len * channels, channels, wm.data(), filters, ob, filters, 0, out_len,
              patch, filters, true);
  }
}

void conv1d_backward(const double* x, const double* kernels, const double* grad_out,
                     double* grad_x, double* grad_kernels, double* grad_bias, std::size_t batch,
                     std::size_t len, std::size_t channels, std::size_t klen,
                     std::size_t filters) {
  const std::size_t out_len = len - klen + 1;
  const std::size_t patch = klen * channels;

  std::fill(grad_bias, grad_bias + filters, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t) {
      const double* g = grad_out + (b * out_len + t) * filters;
      for (std::size_t f = 0; f < filters; ++f) grad_bias[f] += g[f];
    }

  // grad_wm[q][f] = sum_{b,t} x[b, t*channels + q] * grad_out[b, t, f]
  std::vector<double> grad_wm(patch * filters, 0.0);
  const auto nq = static_cast<std::ptrdiff_t>(patch);
#pragma omp parallel for schedule(static) if (batch * out_len * patch * filters > kParallelWork)
  for (std::ptrdiff_t qi = 0; qi < nq; ++qi) {
    const auto q = static_cast<std::size_t>(qi);
    double* row = grad_wm.data() + q * filters;
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x + b * len * channels;
      const double* gb = grad_out + b * out_len * filters;
      for (std::size_t t = 0; t < out_len; ++t) {
        const double xv = xb[t * channels + q];
        if (xv == 0.0) continue;
        const double* g = gb + t * filters;
        for (std::size_t f = 0; f < filters; ++f) row[f] += xv * g[f];
      }
    }
  }
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < klen; ++j)
        grad_kernels[(f * channels + c) * klen + j] = grad_wm[(j * channels + c) * filters + f];

  if (grad_x == nullptr) return;

  // wmt[f][q] = kernels[f][c][j] with q = j*channels + c
  std::vector<double> wmt(filters * patch);
  for (std::size_t f = 0; f < filters; ++f)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t j = 0; j < klen; ++j)
        wmt[f * patch + j * channels + c] = kernels[(f * channels + c) * klen + j];

  const auto nb = static_cast<std::ptrdiff_t>(batch);
#pragma omp parallel for schedule(static) if (batch * out_len * patch * filters > kParallelWork)
  for (std::ptrdiff_t bi = 0; bi < nb; ++bi) {
    const auto b = static_cast<std::size_t>(bi);
    double* gx = grad_x + b * len * channels;
    std::fill(gx, gx + len * channels, 0.0);
    const double* gb = grad_out + b * out_len * filters;
    // Overlapping output rows: sequential in t within one batch element.
    gemm_rows(gb, filters, wmt.data(), patch, gx, channels, 0, out_len, filters, patch, true);
  }
}

namespace serial {

void gemm(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = sum;
    }
}

void gemm_tn(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t r, std::size_t m, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < r; ++p) sum += a[p * lda + i] * b[p * ldb + j];
      c[i * ldc + j] = sum;
    }
}

void gemm_nt(const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc, std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sum = accumulate ? c[i * ldc + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) sum += a[i * lda + p] * b[j * ldb + p];
      c[i * ldc + j] = sum;
    }
}

void conv1d_forward(const double* x, const double* kernels, const double* bias, double* out,
                    std::size_t batch, std::size_t len, std::size_t channels, std::size_t klen,
                    std::size_t filters) {
  const std::size_t out_len = len - klen + 1;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t f = 0; f < filters; ++f) {
        double sum = bias[f];
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t j = 0; j < klen; ++j)
            sum += kernels[(f * channels + c) * klen + j] * x[(b * len + t + j) * channels + c];
        out[(b * out_len + t) * filters + f] = sum;
      }
}

void conv1d_backward(const double* x, const double* kernels, const double* grad_out,
                     double* grad_x, double* grad_kernels, double* grad_bias, std::size_t batch,
                     std::size_t len, std::size_t channels, std::size_t klen,
                     std::size_t filters) {
  const std::size_t out_len = len - klen + 1;
  std::fill(grad_bias, grad_bias + filters, 0.0);
  std::fill(grad_kernels, grad_kernels + filters * channels * klen, 0.0);
  if (grad_x != nullptr) std::fill(grad_x, grad_x + batch * len * channels, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t f = 0; f < filters; ++f) {
        const double g = grad_out[(b * out_len + t) * filters + f];
        grad_bias[f] += g;
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t j = 0; j < klen; ++j) {
            const std::size_t xi = (b * len + t + j) * channels + c;
            const std::size_t wi = (f * channels + c) * klen + j;
            grad_kernels[wi] += g * x[xi];
            if (grad_x != nullptr) grad_x[xi] += g * kernels[wi];
          }
      }
}

}  // namespace serial
}  // namespace dwrpm::kernels
