#include <benchmark/benchmark.h>

#include <vector>

#include "sml/diagnostics.hpp"
#include "sml/rng.hpp"

namespace {

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  sml::Rng rng(5);
  std::vector<double> s(n);
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.gaussian();
    y[i] = rng.uniform() < 0.25;
  }
  for (auto _ : state) benchmark::DoNotOptimize(sml::diagnostics::auc(s, y));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->Arg(1000)->Arg(100000);

void BM_PairwiseCosine(benchmark::State& state) {
  sml::Rng rng(6);
  const auto m = sml::gaussian_matrix(rng, static_cast<std::size_t>(state.range(0)), 64, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(sml::diagnostics::mean_pairwise_cosine(m));
}
BENCHMARK(BM_PairwiseCosine)->Arg(2000);

}  // namespace
