#include <atomic>
#include <cmath>
#include <thread>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::diagnostics {

namespace {

DepthSweepRow run_row(std::size_t depth, const network::SkipVariant& variant, std::uint64_t seed,
                      const network::ModelConfig& base, const data::EncodedDataset& train,
                      const data::EncodedDataset& eval, const training::TrainConfig& train_config,
                      std::size_t width) {
  DepthSweepRow row;
  row.depth = depth;
  row.variant = variant.name();
  row.seed = seed;
  try {
    network::ModelConfig mc = base;
    mc.tower_widths.assign(depth, width);
    mc.skip = variant;
    if (!variant.enabled) mc.include_tower_head = true;
    mc.seed = seed;
    training::TrainConfig tc = train_config;
    tc.seed = seed;
    auto state = training::make_train_state(mc, tc);
    const auto fit = training::fit(state, train, &eval, tc);
    row.collapsed = fit.collapse.collapsed;
    row.note = fit.collapse.reason;
    row.epochs_completed = state.epoch;
    if (training::params_finite(state.model.params())) {
      const auto logits = training::predict_logits(state.model, eval);
      bool finite = true;
      for (double z : logits) finite = finite && std::isfinite(z);
      if (finite) {
        row.logloss = training::logloss_from_logits(logits, eval.labels);
        try {
          row.auc = auc(logits, eval.labels);
        } catch (const UndefinedMetric&) {
        }
      }
    }
  } catch (const std::exception& e) {
    row.collapsed = true;
    row.note = std::string("error: ") + e.what();
  }
  return row;
}

}  // namespace

std::vector<DepthSweepRow> depth_sweep(std::span<const std::size_t> depths, const network::ModelConfig& base,
                                       const data::EncodedDataset& train, const data::EncodedDataset& eval,
                                       const training::TrainConfig& train_config, const DepthSweepOptions& options) {
  require(options.width >= 1, "depth_sweep: width must be >= 1");
  struct Task {
    std::size_t depth;
    std::size_t variant;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t d : depths) {
    require(d >= 1, "depth_sweep: depths must be >= 1");
    for (std::size_t v = 0; v < options.variants.size(); ++v)
      for (std::uint64_t s : options.seeds) tasks.push_back({d, v, s});
  }
  std::vector<DepthSweepRow> rows(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& t = tasks[i];
      rows[i] = run_row(t.depth, options.variants[t.variant], t.seed, base, train, eval, train_config, options.width);
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, tasks.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

}  // namespace sml::diagnostics
