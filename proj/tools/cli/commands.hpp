#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "run_config.hpp"
#include "sml/data.hpp"

namespace sml::cli {

struct GenDataArgs {
  std::filesystem::path out;
  std::optional<std::filesystem::path> criteo;
};

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  bool resume = false;
  std::optional<std::uint64_t> stop_at_step;
};

struct EvaluateArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::filesystem::path out;
};

struct DiagnoseArgs {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> data;
  std::filesystem::path out;
};

struct SweepArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  std::size_t jobs = 1;
};

struct TheoryArgs {
  std::filesystem::path out;
  std::size_t jobs = 1;
};

int cmd_gen_data(const RunConfig& config, const GenDataArgs& args);
int cmd_train(const RunConfig& config, const TrainArgs& args);
int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args);
int cmd_diagnose(const RunConfig& config, const DiagnoseArgs& args);
int cmd_sweep_depth(const RunConfig& config, const SweepArgs& args);
int cmd_verify_theory(const RunConfig& config, const TheoryArgs& args);

/// Theory campaign result; "pass" is the conjunction of every check.
nlohmann::json run_theory_checks(const TheoryOptions& options, std::size_t jobs);

// Shared helpers.
struct LoadedData {
  data::EncodedDataset all;
  nlohmann::json meta;
};
/// .smld caches are read directly; any other file is parsed as Criteo TSV
/// with the configured schema. Throws DataError.
LoadedData load_data(const std::filesystem::path& path, const RunConfig& config);
data::EncodedDataset split_part(const data::EncodedDataset& all, std::uint64_t split_seed, const std::string& part);
/// Copies the data's input layout into the model config.
network::ModelConfig model_for_data(network::ModelConfig model, const data::EncodedDataset& d);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace sml::cli
