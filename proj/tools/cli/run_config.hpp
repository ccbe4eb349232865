#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/data.hpp"
#include "sml/network.hpp"
#include "sml/training.hpp"

namespace sml::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,
  kDataError = 3,
  kCollapse = 4,
  kTheoryFailure = 5,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataOptions {
  std::uint64_t split_seed = 0;
  data::ErrorPolicy error_policy = data::ErrorPolicy::Skip;
};

struct DiagnosticsOptions {
  std::string mode = "init";        // init | trained
  std::string input = "data";       // data | gaussian
  std::string split = "validation"; // train | validation | test | all
  std::size_t samples = 2000;
  std::uint64_t probe_seed = 0;
  std::optional<std::size_t> layer;  // cosine layer; all layers when unset
};

struct SweepOptions {
  std::vector<std::size_t> depths{4, 8, 16};
  std::vector<std::string> variants{"dnn", "meta_tanh"};
  std::vector<std::uint64_t> seeds;  // empty: the run seed only
  std::size_t width = 64;
  std::string eval_split = "validation";
};

struct TheoryOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-8;
  std::size_t gradient_bound_instances = 1000;
  std::size_t gradient_instances = 100;
  std::size_t risk_instances = 50;
  std::size_t risk_samples = 1000000;
  std::size_t descent_instances = 20;
  std::size_t min_dim = 2;
  std::size_t max_dim = 5;
  std::size_t max_layers = 4;
  double max_layer_norm = 0.3;
  std::size_t relu_samples = 10000000;
  std::size_t variance_width = 64;
  std::size_t variance_samples = 100000;
  std::size_t variance_inits = 256;
  std::size_t resnet_samples = 20000;
  std::size_t resnet_depth = 8;
  std::vector<std::size_t> path_counts{2, 4, 8, 16};
  std::size_t taylor_points = 10000;
};

/// Fully resolved configuration. `resolved` is the canonical JSON form and is
/// what every artifact echoes.
struct RunConfig {
  data::SyntheticSpec synthetic;
  data::DatasetSchema schema = data::DatasetSchema::criteo(10000);
  DataOptions data;
  network::ModelConfig model;
  training::TrainConfig train;
  DiagnosticsOptions diagnostics;
  SweepOptions sweep;
  TheoryOptions theory;
  std::optional<std::uint64_t> seed;

  nlohmann::json to_json() const;
};

nlohmann::json default_config_json();

/// "1.5" and "[4,8]" parse as JSON; anything that is not valid JSON is taken
/// as a plain string, so --model.skip=meta_tanh needs no quoting.
nlohmann::json parse_override_value(const std::string& text);

/// Sets cfg[section][key...] from a dotted path. Throws ConfigError for an
/// unknown section or a malformed path; keys are validated when typed.
void apply_override(nlohmann::json& cfg, const std::string& dotted, const nlohmann::json& value);

/// defaults <- file <- overrides <- seed, then typed parse of every section.
/// --seed sets synthetic.seed, model.seed, train.seed and theory.seed.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides,
                         std::optional<std::uint64_t> seed);

RunConfig config_from_json(const nlohmann::json& j);

}  // namespace sml::cli
