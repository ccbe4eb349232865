#include "run_config.hpp"

#include <fstream>
#include <set>

#include "sml/errors.hpp"

namespace sml::cli {

namespace {

const std::set<std::string> kSections{"synthetic", "schema", "data",  "model",
                                      "train",     "diagnostics", "sweep", "theory"};

template <typename T>
T get_field(const std::string& section, const std::string& key, const nlohmann::json& value) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(section + "." + key + ": wrong type (" + std::string(value.type_name()) + ")");
  }
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
  throw ConfigError(section + ": unknown key '" + key + "'");
}

nlohmann::json data_json(const DataOptions& d) {
  return {{"split_seed", d.split_seed}, {"error_policy", d.error_policy == data::ErrorPolicy::Skip ? "skip" : "fail"}};
}

DataOptions data_from(const nlohmann::json& j) {
  DataOptions d;
  for (const auto& [k, v] : j.items()) {
    if (k == "split_seed") d.split_seed = get_field<std::uint64_t>("data", k, v);
    else if (k == "error_policy") {
      const auto s = get_field<std::string>("data", k, v);
      if (s == "skip") d.error_policy = data::ErrorPolicy::Skip;
      else if (s == "fail") d.error_policy = data::ErrorPolicy::Fail;
      else throw ConfigError("data.error_policy: expected 'skip' or 'fail', got '" + s + "'");
    } else unknown_key("data", k);
  }
  return d;
}

nlohmann::json diagnostics_json(const DiagnosticsOptions& d) {
  return {{"mode", d.mode},       {"input", d.input},
          {"split", d.split},     {"samples", d.samples},
          {"probe_seed", d.probe_seed}, {"layer", d.layer ? nlohmann::json(*d.layer) : nlohmann::json()}};
}

void require_one_of(const std::string& where, const std::string& value, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (value == a) return;
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ConfigError(where + ": '" + value + "' is not one of " + list);
}

DiagnosticsOptions diagnostics_from(const nlohmann::json& j) {
  DiagnosticsOptions d;
  for (const auto& [k, v] : j.items()) {
    if (k == "mode") d.mode = get_field<std::string>("diagnostics", k, v);
    else if (k == "input") d.input = get_field<std::string>("diagnostics", k, v);
    else if (k == "split") d.split = get_field<std::string>("diagnostics", k, v);
    else if (k == "samples") d.samples = get_field<std::size_t>("diagnostics", k, v);
    else if (k == "probe_seed") d.probe_seed = get_field<std::uint64_t>("diagnostics", k, v);
    else if (k == "layer") {
      if (v.is_null()) d.layer.reset();
      else d.layer = get_field<std::size_t>("diagnostics", k, v);
    } else unknown_key("diagnostics", k);
  }
  require_one_of("diagnostics.mode", d.mode, {"init", "trained"});
  require_one_of("diagnostics.input", d.input, {"data", "gaussian"});
  require_one_of("diagnostics.split", d.split, {"train", "validation", "test", "all"});
  if (d.samples < 2) throw ConfigError("diagnostics.samples: must be >= 2");
  return d;
}

nlohmann::json sweep_json(const SweepOptions& s) {
  return {{"depths", s.depths}, {"variants", s.variants}, {"seeds", s.seeds}, {"width", s.width},
          {"eval_split", s.eval_split}};
}

SweepOptions sweep_from(const nlohmann::json& j) {
  SweepOptions s;
  for (const auto& [k, v] : j.items()) {
    if (k == "depths") s.depths = get_field<std::vector<std::size_t>>("sweep", k, v);
    else if (k == "variants") s.variants = get_field<std::vector<std::string>>("sweep", k, v);
    else if (k == "seeds") s.seeds = get_field<std::vector<std::uint64_t>>("sweep", k, v);
    else if (k == "width") s.width = get_field<std::size_t>("sweep", k, v);
    else if (k == "eval_split") s.eval_split = get_field<std::string>("sweep", k, v);
    else unknown_key("sweep", k);
  }
  for (const auto& name : s.variants) {
    try {
      network::SkipVariant::parse(name);
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("sweep.variants: ") + e.what());
    }
  }
  for (std::size_t d : s.depths)
    if (d == 0) throw ConfigError("sweep.depths: depths must be >= 1");
  if (s.width == 0) throw ConfigError("sweep.width: must be >= 1");
  require_one_of("sweep.eval_split", s.eval_split, {"train", "validation", "test"});
  return s;
}

nlohmann::json theory_json(const TheoryOptions& t) {
  return {{"seed", t.seed},
          {"tolerance", t.tolerance},
          {"gradient_bound_instances", t.gradient_bound_instances},
          {"gradient_instances", t.gradient_instances},
          {"risk_instances", t.risk_instances},
          {"risk_samples", t.risk_samples},
          {"descent_instances", t.descent_instances},
          {"min_dim", t.min_dim},
          {"max_dim", t.max_dim},
          {"max_layers", t.max_layers},
          {"max_layer_norm", t.max_layer_norm},
          {"relu_samples", t.relu_samples},
          {"variance_width", t.variance_width},
          {"variance_samples", t.variance_samples},
          {"variance_inits", t.variance_inits},
          {"resnet_samples", t.resnet_samples},
          {"resnet_depth", t.resnet_depth},
          {"path_counts", t.path_counts},
          {"taylor_points", t.taylor_points}};
}

TheoryOptions theory_from(const nlohmann::json& j) {
  TheoryOptions t;
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") t.seed = get_field<std::uint64_t>("theory", k, v);
    else if (k == "tolerance") t.tolerance = get_field<double>("theory", k, v);
    else if (k == "gradient_bound_instances") t.gradient_bound_instances = get_field<std::size_t>("theory", k, v);
    else if (k == "gradient_instances") t.gradient_instances = get_field<std::size_t>("theory", k, v);
    else if (k == "risk_instances") t.risk_instances = get_field<std::size_t>("theory", k, v);
    else if (k == "risk_samples") t.risk_samples = get_field<std::size_t>("theory", k, v);
    else if (k == "descent_instances") t.descent_instances = get_field<std::size_t>("theory", k, v);
    else if (k == "min_dim") t.min_dim = get_field<std::size_t>("theory", k, v);
    else if (k == "max_dim") t.max_dim = get_field<std::size_t>("theory", k, v);
    else if (k == "max_layers") t.max_layers = get_field<std::size_t>("theory", k, v);
    else if (k == "max_layer_norm") t.max_layer_norm = get_field<double>("theory", k, v);
    else if (k == "relu_samples") t.relu_samples = get_field<std::size_t>("theory", k, v);
    else if (k == "variance_width") t.variance_width = get_field<std::size_t>("theory", k, v);
    else if (k == "variance_samples") t.variance_samples = get_field<std::size_t>("theory", k, v);
    else if (k == "variance_inits") t.variance_inits = get_field<std::size_t>("theory", k, v);
    else if (k == "resnet_samples") t.resnet_samples = get_field<std::size_t>("theory", k, v);
    else if (k == "resnet_depth") t.resnet_depth = get_field<std::size_t>("theory", k, v);
    else if (k == "path_counts") t.path_counts = get_field<std::vector<std::size_t>>("theory", k, v);
    else if (k == "taylor_points") t.taylor_points = get_field<std::size_t>("theory", k, v);
    else unknown_key("theory", k);
  }
  if (t.min_dim < 1 || t.max_dim < t.min_dim) throw ConfigError("theory: need 1 <= min_dim <= max_dim");
  if (t.max_layers < 1) throw ConfigError("theory.max_layers: must be >= 1");
  if (t.relu_samples < 10000) throw ConfigError("theory.relu_samples: must be >= 10000");
  if (t.risk_samples < 2) throw ConfigError("theory.risk_samples: must be >= 2");
  if (t.variance_inits < 1 || t.variance_samples < 2 * t.variance_inits) {
    throw ConfigError("theory: variance_samples must be at least 2 * variance_inits");
  }
  for (std::size_t p : t.path_counts)
    if (p < 2) throw ConfigError("theory.path_counts: every path count must be >= 2");
  return t;
}

template <typename T>
T typed(const std::string& section, const nlohmann::json& j) {
  try {
    return j.get<T>();
  } catch (const ContractViolation& e) {
    throw ConfigError(section + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

void merge_into(nlohmann::json& base, const nlohmann::json& overlay, const std::string& origin) {
  if (!overlay.is_object()) throw ConfigError(origin + ": configuration must be a JSON object");
  for (const auto& [section, value] : overlay.items()) {
    if (section == "seed") {
      base["seed"] = value;
      continue;
    }
    if (!kSections.count(section)) throw ConfigError(origin + ": unknown section '" + section + "'");
    if (!value.is_object()) throw ConfigError(origin + ": section '" + section + "' must be an object");
    for (const auto& [key, v] : value.items()) base[section][key] = v;
  }
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["synthetic"] = synthetic;
  j["schema"] = schema;
  j["data"] = data_json(data);
  j["model"] = model;
  j["train"] = train;
  j["diagnostics"] = diagnostics_json(diagnostics);
  j["sweep"] = sweep_json(sweep);
  j["theory"] = theory_json(theory);
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json();
  return j;
}

nlohmann::json default_config_json() { return RunConfig{}.to_json(); }

nlohmann::json parse_override_value(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    return text;
  }
}

void apply_override(nlohmann::json& cfg, const std::string& dotted, const nlohmann::json& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == dotted.size()) {
    throw ConfigError("override '" + dotted + "' must have the form section.key");
  }
  const std::string section = dotted.substr(0, dot);
  if (!kSections.count(section)) throw ConfigError("override '" + dotted + "': unknown section '" + section + "'");
  nlohmann::json* node = &cfg[section];
  std::size_t start = dot + 1;
  for (;;) {
    const auto next = dotted.find('.', start);
    const std::string key = dotted.substr(start, next == std::string::npos ? std::string::npos : next - start);
    if (key.empty()) throw ConfigError("override '" + dotted + "': empty key");
    if (next == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    if (!node->is_object() && !node->is_null()) throw ConfigError("override '" + dotted + "': '" + key + "' is not an object");
    start = next + 1;
  }
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  for (const auto& [section, value] : j.items()) {
    if (section == "synthetic") c.synthetic = typed<data::SyntheticSpec>(section, value);
    else if (section == "schema") c.schema = typed<data::DatasetSchema>(section, value);
    else if (section == "data") c.data = data_from(value);
    else if (section == "model") c.model = typed<network::ModelConfig>(section, value);
    else if (section == "train") c.train = typed<training::TrainConfig>(section, value);
    else if (section == "diagnostics") c.diagnostics = diagnostics_from(value);
    else if (section == "sweep") c.sweep = sweep_from(value);
    else if (section == "theory") c.theory = theory_from(value);
    else if (section == "seed") {
      if (!value.is_null()) c.seed = get_field<std::uint64_t>("seed", "seed", value);
    } else throw ConfigError("unknown section '" + section + "'");
  }
  try {
    c.synthetic.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("synthetic: ") + e.what());
  }
  try {
    c.schema.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  try {
    c.train.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return c;
}

RunConfig resolve_config(const std::optional<std::filesystem::path>& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides,
                         std::optional<std::uint64_t> seed) {
  nlohmann::json cfg = default_config_json();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config file '" + file->string() + "'");
    nlohmann::json loaded;
    try {
      loaded = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file '" + file->string() + "' is not valid JSON: " + e.what());
    }
    merge_into(cfg, loaded, file->string());
  }
  for (const auto& [path, text] : overrides) apply_override(cfg, path, parse_override_value(text));
  if (seed) {
    cfg["seed"] = *seed;
    cfg["synthetic"]["seed"] = *seed;
    cfg["model"]["seed"] = *seed;
    cfg["train"]["seed"] = *seed;
    cfg["theory"]["seed"] = *seed;
  }
  return config_from_json(cfg);
}

}  // namespace sml::cli
