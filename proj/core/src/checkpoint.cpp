#include <fstream>

#include "sml/errors.hpp"
#include "sml/training.hpp"

namespace sml::training {

nlohmann::json checkpoint_to_json(const TrainState& state, const TrainConfig& config, const nlohmann::json& extra) {
  nlohmann::json m = nlohmann::json::object();
  nlohmann::json v = nlohmann::json::object();
  const auto named = network::named_parameters(state.model.params());
  require(named.size() == state.adam.m.size(), "checkpoint: Adam state does not match the model");
  for (std::size_t i = 0; i < named.size(); ++i) {
    m[named[i].first] = network::matrix_to_json(state.adam.m[i]);
    v[named[i].first] = network::matrix_to_json(state.adam.v[i]);
  }
  nlohmann::json j;
  j["format"] = "sml-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model_config"] = state.model.config();
  j["train_config"] = config;
  j["params"] = network::params_to_json(state.model.params());
  j["adam"] = {{"lr", state.adam.config.lr},
               {"beta1", state.adam.config.beta1},
               {"beta2", state.adam.config.beta2},
               {"eps", state.adam.config.eps},
               {"t", state.adam.t},
               {"m", m},
               {"v", v}};
  j["shuffle"] = {{"seed", state.shuffle.seed}, {"words", state.shuffle.words}};
  j["counters"] = {{"epoch", state.epoch},
                   {"batch_in_epoch", state.batch_in_epoch},
                   {"step", state.step},
                   {"epoch_loss_sum", state.epoch_loss_sum},
                   {"epoch_samples", state.epoch_samples}};
  j["extra"] = extra;
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.value("format", "") == "sml-checkpoint", "checkpoint: not an sml checkpoint");
  const int version = j.at("version").get<int>();
  require(version == kCheckpointVersion, "checkpoint: unsupported version " + std::to_string(version));

  const auto model_config = j.at("model_config").get<network::ModelConfig>();
  TrainConfig config = j.at("train_config").get<TrainConfig>();
  network::Model model(model_config, network::params_from_json(j.at("params"), model_config));

  const auto& a = j.at("adam");
  AdamState adam = AdamState::for_params(model.params(), AdamConfig{a.at("lr").get<double>(), a.at("beta1").get<double>(),
                                                                    a.at("beta2").get<double>(), a.at("eps").get<double>()});
  adam.t = a.at("t").get<std::uint64_t>();
  const auto named = network::named_parameters(model.params());
  for (std::size_t i = 0; i < named.size(); ++i) {
    adam.m[i] = network::matrix_from_json(a.at("m").at(named[i].first));
    adam.v[i] = network::matrix_from_json(a.at("v").at(named[i].first));
    require(adam.m[i].same_shape(*named[i].second) && adam.v[i].same_shape(*named[i].second),
            "checkpoint: Adam moment shape mismatch for " + named[i].first);
  }

  RngState shuffle;
  shuffle.seed = j.at("shuffle").at("seed").get<std::uint64_t>();
  shuffle.words = j.at("shuffle").at("words").get<std::array<std::uint64_t, 4>>();

  const auto& c = j.at("counters");
  TrainState state{std::move(model), std::move(adam), shuffle};
  state.epoch = c.at("epoch").get<std::size_t>();
  state.batch_in_epoch = c.at("batch_in_epoch").get<std::size_t>();
  state.step = c.at("step").get<std::uint64_t>();
  state.epoch_loss_sum = c.at("epoch_loss_sum").get<double>();
  state.epoch_samples = c.at("epoch_samples").get<std::size_t>();
  return Checkpoint{std::move(state), config, j.value("extra", nlohmann::json::object())};
}

void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& config,
                     const nlohmann::json& extra) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << checkpoint_to_json(state, config, extra).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ContractViolation("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace sml::training
