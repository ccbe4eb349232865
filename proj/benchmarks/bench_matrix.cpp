#include <benchmark/benchmark.h>

#include "sml/landscape.hpp"
#include "sml/matrix.hpp"
#include "sml/rng.hpp"

namespace {

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sml::Rng rng(1);
  const auto a = sml::gaussian_matrix(rng, n, n, 1.0);
  const auto b = sml::gaussian_matrix(rng, n, n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sml::gemm(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(16)->Arg(64)->Arg(256);

void BM_GemmTN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sml::Rng rng(2);
  const auto a = sml::gaussian_matrix(rng, 512, n, 1.0);
  const auto b = sml::gaussian_matrix(rng, 512, n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sml::gemm_tn(a, b));
}
BENCHMARK(BM_GemmTN)->Arg(64)->Arg(256);

void BM_SpectralExtremes(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sml::Rng rng(3);
  const auto m = sml::gaussian_matrix(rng, n, n, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sml::landscape::spectral_extremes(m));
}
BENCHMARK(BM_SpectralExtremes)->Arg(5)->Arg(32);

}  // namespace
