#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/data.hpp"
#include "sml/network.hpp"
#include "sml/rng.hpp"

namespace sml::training {

inline constexpr double kProbabilityClip = 1e-7;

/// Mean binary cross-entropy with p clipped to [1e-7, 1 - 1e-7].
double logloss(std::span<const double> probabilities, std::span<const std::uint8_t> labels);
double logloss_from_logits(std::span<const double> logits, std::span<const std::uint8_t> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;

  static AdamState for_params(const network::ModelParams& params, const AdamConfig& config);
};

enum class StepStatus { Ok, NonFiniteGradient };

/// One bias-corrected Adam update; t advances once per successful call.
/// A non-finite gradient leaves params and state untouched and is reported.
StepStatus adam_step(AdamState& state, std::span<Matrix* const> params, std::span<const Matrix* const> grads);
StepStatus adam_step(AdamState& state, network::ModelParams& params, const network::ModelParams& grads);

struct CollapsePolicy {
  bool check_non_finite = true;
  double auc_floor = 0.502;     // validation AUC below this...
  std::size_t min_epochs = 2;   // ...after at least this many epochs collapses the run

  friend bool operator==(const CollapsePolicy&, const CollapsePolicy&) = default;
};

struct TrainConfig {
  std::size_t batch_size = 1024;
  std::size_t epochs = 5;
  AdamConfig adam;
  std::uint64_t seed = 0;
  CollapsePolicy collapse;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainState {
  network::Model model;
  AdamState adam;
  RngState shuffle;             // base stream; epoch e shuffles with split(e)
  std::size_t epoch = 0;        // completed epochs
  std::size_t batch_in_epoch = 0;
  std::uint64_t step = 0;
  double epoch_loss_sum = 0.0;  // sample-weighted, for the epoch in progress
  std::size_t epoch_samples = 0;
};

TrainState make_train_state(const network::ModelConfig& model_config, const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::uint64_t step = 0;
  double train_logloss = 0.0;
  std::optional<double> val_auc;
  std::optional<double> val_logloss;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct CollapseInfo {
  bool collapsed = false;
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  std::string reason;
};

struct FitResult {
  std::vector<EpochRecord> history;
  CollapseInfo collapse;
  std::optional<std::size_t> best_epoch;  // highest validation AUC
};

struct FitOptions {
  std::optional<std::uint64_t> stop_at_step;  // pause (not an error) once state.step reaches it
};

/// Trains until state.epoch == config.epochs, a collapse, or stop_at_step.
/// Mini-batches follow a full Fisher-Yates permutation per epoch from the
/// shuffle stream, so data order never depends on model state.
FitResult fit(TrainState& state, const data::EncodedDataset& train, const data::EncodedDataset* validation,
              const TrainConfig& config, const FitOptions& options = {});

/// Logits for every row of `data`, evaluated in fixed-size chunks.
std::vector<double> predict_logits(const network::Model& model, const data::EncodedDataset& data,
                                   std::size_t chunk = 4096);

bool params_finite(const network::ModelParams& params);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const EpochRecord& r);

/// Version-tagged JSON checkpoint of a TrainState (parameters, Adam moments,
/// shuffle stream, counters) plus the train config and a free-form "extra"
/// object. Doubles are written in shortest round-trip form, so a load
/// reproduces the state bit for bit.
inline constexpr int kCheckpointVersion = 1;
struct Checkpoint {
  TrainState state;
  TrainConfig config;
  nlohmann::json extra;
};
nlohmann::json checkpoint_to_json(const TrainState& state, const TrainConfig& config,
                                  const nlohmann::json& extra = nlohmann::json::object());
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& config,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sml::training
