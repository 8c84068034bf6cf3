// Parallel kernels against their serial references, at the shapes the
// models hit during training (batch 32, sequence 210).

#include <benchmark/benchmark.h>
#include <omp.h>

#include <string>
#include <vector>

#include "dwrpm/kernels.hpp"
#include "dwrpm/rng.hpp"

namespace {

using namespace dwrpm;

std::vector<double> filled(std::size_t n, std::uint64_t stream) {
  Rng rng(7, stream);
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = filled(m * k, 1);
  const auto b = filled(k * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::gemm(a.data(), k, b.data(), n, c.data(), n, m, k, n, false);
    else
      kernels::serial::gemm(a.data(), k, b.data(), n, c.data(), n, m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * m * k * n));
}

template <bool Parallel>
void BM_GemmTN(benchmark::State& state) {
  const auto r = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = filled(r * m, 3);
  const auto b = filled(r * n, 4);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::gemm_tn(a.data(), m, b.data(), n, c.data(), n, r, m, n, false);
    else
      kernels::serial::gemm_tn(a.data(), m, b.data(), n, c.data(), n, r, m, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * r * m * n));
}

template <bool Parallel>
void BM_Conv1D(benchmark::State& state) {
  const std::size_t batch = 32, len = 210, klen = 5;
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto filters = static_cast<std::size_t>(state.range(1));
  const std::size_t out_len = len - klen + 1;
  const auto x = filled(batch * len * channels, 5);
  const auto w = filled(filters * channels * klen, 6);
  const auto bias = filled(filters, 7);
  std::vector<double> out(batch * out_len * filters);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::conv1d_forward(x.data(), w.data(), bias.data(), out.data(), batch, len, channels,
                              klen, filters);
    else
      kernels::serial::conv1d_forward(x.data(), w.data(), bias.data(), out.data(), batch, len,
                                      channels, klen, filters);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(
      static_cast<int64_t>(state.iterations() * batch * out_len * filters * channels * klen));
}

template <bool Parallel>
void BM_Conv1DBackward(benchmark::State& state) {
  const std::size_t batch = 32, len = 210, klen = 5;
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto filters = static_cast<std::size_t>(state.range(1));
  const std::size_t out_len = len - klen + 1;
  const auto x = filled(batch * len * channels, 8);
  const auto w = filled(filters * channels * klen, 9);
  const auto g = filled(batch * out_len * filters, 10);
  std::vector<double> gx(x.size()), gw(w.size()), gb(filters);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::conv1d_backward(x.data(), w.data(), g.data(), gx.data(), gw.data(), gb.data(),
                               batch, len, channels, klen, filters);
    else
      kernels::serial::conv1d_backward(x.data(), w.data(), g.data(), gx.data(), gw.data(),
                                       gb.data(), batch, len, channels, klen, filters);
    benchmark::DoNotOptimize(gw.data());
  }
}

// First two dense layers of the deep branch: 210 -> 300 -> 200.
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Args({32, 210, 300})->Args({32, 300, 200});
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Args({32, 210, 300})->Args({32, 300, 200});
// Weight gradients: x^T * grad_out.
BENCHMARK(BM_GemmTN<false>)->Name("gemm_tn/serial")->Args({32, 210, 300})->Args({32, 300, 200});
BENCHMARK(BM_GemmTN<true>)->Name("gemm_tn/parallel")->Args({32, 210, 300})->Args({32, 300, 200});
// Conv layers: 1 -> 100 channels, then 100 -> 100.
BENCHMARK(BM_Conv1D<false>)->Name("conv1d/serial")->Args({1, 100})->Args({100, 100});
BENCHMARK(BM_Conv1D<true>)->Name("conv1d/parallel")->Args({1, 100})->Args({100, 100});
BENCHMARK(BM_Conv1DBackward<false>)->Name("conv1d_backward/serial")->Args({1, 100})->Args({100, 100});
BENCHMARK(BM_Conv1DBackward<true>)->Name("conv1d_backward/parallel")->Args({1, 100})->Args({100, 100});

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
