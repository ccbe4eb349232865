#include <benchmark/benchmark.h>

#include <vector>

#include "sml/network.hpp"
#include "sml/rng.hpp"

namespace {

using sml::network::SkipVariant;

sml::network::ModelConfig config(std::size_t depth, SkipVariant v) {
  sml::network::ModelConfig c;
  c.vocab_sizes.assign(20, 1000);
  c.tower_widths.assign(depth, 64);
  c.skip = v;
  return c;
}

std::vector<std::uint32_t> indices(std::size_t rows) {
  sml::Rng rng(4);
  std::vector<std::uint32_t> idx(rows * 20);
  for (auto& i : idx) i = static_cast<std::uint32_t>(rng.uniform_below(1000));
  return idx;
}

void run_forward(benchmark::State& state, SkipVariant v) {
  const sml::network::Model model(config(static_cast<std::size_t>(state.range(0)), v));
  const auto idx = indices(512);
  const sml::Matrix cont(512, 0);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(idx, cont));
  state.SetItemsProcessed(state.iterations() * 512);
}

void run_step(benchmark::State& state, SkipVariant v) {
  const sml::network::Model model(config(static_cast<std::size_t>(state.range(0)), v));
  const auto idx = indices(512);
  const sml::Matrix cont(512, 0);
  const std::vector<double> d(512, 1.0 / 512);
  for (auto _ : state) {
    const auto cache = model.forward(idx, cont);
    benchmark::DoNotOptimize(model.backward(cache, d));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}

void BM_ForwardDnn(benchmark::State& s) { run_forward(s, SkipVariant::plain_dnn()); }
void BM_ForwardMetaTanh(benchmark::State& s) { run_forward(s, SkipVariant::meta_tanh()); }
void BM_StepDnn(benchmark::State& s) { run_step(s, SkipVariant::plain_dnn()); }
void BM_StepMetaTanh(benchmark::State& s) { run_step(s, SkipVariant::meta_tanh()); }
BENCHMARK(BM_ForwardDnn)->Arg(4)->Arg(30);
BENCHMARK(BM_ForwardMetaTanh)->Arg(4)->Arg(50);
BENCHMARK(BM_StepDnn)->Arg(4)->Arg(30);
BENCHMARK(BM_StepMetaTanh)->Arg(4)->Arg(50);

}  // namespace
