#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"
#include "sml/training.hpp"

namespace sml::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

LoadedData load_data(const fs::path& path, const RunConfig& config) {
  if (!fs::exists(path)) throw DataError("data file '" + path.string() + "' does not exist");
  try {
    if (path.extension() == ".smld") {
      auto c = data::read_dataset_cache(path);
      return {std::move(c.data), std::move(c.meta)};
    }
    auto r = data::read_criteo_file(path, config.schema, config.data.error_policy);
    json meta{{"source", "criteo_tsv"}, {"schema", config.schema}, {"lines", r.lines}, {"skipped", r.skipped}};
    return {std::move(r.data), std::move(meta)};
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("cannot read '" + path.string() + "': " + e.what());
  }
}

data::EncodedDataset split_part(const data::EncodedDataset& all, std::uint64_t split_seed, const std::string& part) {
  if (part == "all") return all;
  if (all.rows() < 10) throw DataError("dataset has " + std::to_string(all.rows()) + " rows; at least 10 are needed");
  const auto s = data::split_811(all.rows(), split_seed);
  if (part == "train") return all.subset(s.train);
  if (part == "validation") return all.subset(s.validation);
  if (part == "test") return all.subset(s.test);
  throw ConfigError("unknown split '" + part + "'");
}

network::ModelConfig model_for_data(network::ModelConfig model, const data::EncodedDataset& d) {
  model.vocab_sizes = d.vocab_sizes;
  model.continuous_count = d.continuous_count;
  try {
    model.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return model;
}

namespace {

json data_echo(const LoadedData& d) {
  return {{"rows", d.all.rows()}, {"fields", d.all.fields}, {"continuous_count", d.all.continuous_count},
          {"meta", d.meta}};
}

std::optional<double> try_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  try {
    return diagnostics::auc(scores, labels);
  } catch (const UndefinedMetric&) {
    return std::nullopt;
  }
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(); }

training::Checkpoint load_checkpoint_or_throw(const fs::path& path, const char* what) {
  try {
    return training::load_checkpoint(path);
  } catch (const std::exception& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

double positive_rate(const data::EncodedDataset& d) {
  if (d.rows() == 0) return 0.0;
  const double pos = std::accumulate(d.labels.begin(), d.labels.end(), 0.0);
  return pos / static_cast<double>(d.rows());
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_gen_data(const RunConfig& config, const GenDataArgs& args) {
  fs::create_directories(args.out);
  const json resolved = config.to_json();
  if (args.criteo) {
    data::CriteoReadResult r;
    try {
      r = data::read_criteo_file(*args.criteo, config.schema, config.data.error_policy);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    if (r.data.rows() == 0) throw DataError("no usable rows in '" + args.criteo->string() + "'");
    const json meta{{"source", "criteo_tsv"}, {"schema", config.schema}, {"lines", r.lines}, {"skipped", r.skipped}};
    data::write_dataset_cache(args.out / "data.smld", r.data, meta);
    write_json(args.out / "ingest.json", {{"config", resolved},
                                          {"rows", r.data.rows()},
                                          {"lines", r.lines},
                                          {"skipped", r.skipped},
                                          {"errors", r.errors},
                                          {"positive_rate", positive_rate(r.data)}});
    return kOk;
  }

  const auto syn = data::synthesize(config.synthetic);
  const json meta{{"source", "synthetic"}, {"synthetic", config.synthetic}};
  data::write_dataset_cache(args.out / "data.smld", syn.data, meta);

  json truth{{"config", resolved}, {"rows", syn.data.rows()}, {"positive_rate", positive_rate(syn.data)}};
  truth["oracle_auc"] = opt(try_auc(syn.bayes_scores, syn.data.labels));
  if (syn.data.rows() >= 10) {
    const auto s = data::split_811(syn.data.rows(), config.data.split_seed);
    for (const auto& [name, idx] : {std::pair{"train", &s.train}, {"validation", &s.validation}, {"test", &s.test}}) {
      std::vector<double> sc;
      std::vector<std::uint8_t> lb;
      for (std::size_t i : *idx) {
        sc.push_back(syn.bayes_scores[i]);
        lb.push_back(syn.data.labels[i]);
      }
      truth["oracle_auc_by_split"][name] = opt(try_auc(sc, lb));
      std::vector<double> logits = sc;
      truth["oracle_logloss_by_split"][name] = lb.empty() ? json() : json(training::logloss_from_logits(logits, lb));
    }
  }
  truth["bayes_scores"] = syn.bayes_scores;
  write_json(args.out / "ground_truth.json", truth);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& config, const TrainArgs& args) {
  const LoadedData loaded = load_data(args.data, config);
  const auto train = split_part(loaded.all, config.data.split_seed, "train");
  const auto val = split_part(loaded.all, config.data.split_seed, "validation");
  const network::ModelConfig mc = model_for_data(config.model, loaded.all);

  json resolved = config.to_json();
  resolved["model"] = mc;
  const json header{{"type", "header"}, {"config", resolved}, {"data", data_echo(loaded)}};

  fs::create_directories(args.out);
  const fs::path ckpt_path = args.out / "checkpoint.json";
  const fs::path history_path = args.out / "history.jsonl";

  std::optional<training::TrainState> state;
  std::vector<json> history;
  if (args.resume) {
    if (!fs::exists(ckpt_path)) throw DataError("--resume: no checkpoint at '" + ckpt_path.string() + "'");
    training::Checkpoint ck = load_checkpoint_or_throw(ckpt_path, "--resume");
    if (!(ck.state.model.config() == mc)) {
      throw ConfigError("--resume: checkpoint model config differs from the resolved config");
    }
    state.emplace(std::move(ck.state));
    if (fs::exists(history_path)) {
      std::ifstream in(history_path);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) history.push_back(json::parse(line));
      }
    }
    if (history.empty()) history.push_back(header);
  } else {
    state.emplace(training::make_train_state(mc, config.train));
    history.push_back(header);
  }

  auto flush_history = [&] {
    std::string text;
    for (const auto& h : history) text += h.dump() + "\n";
    write_text(history_path, text);
  };
  auto save = [&] {
    training::save_checkpoint(ckpt_path, *state, config.train, {{"config", resolved}, {"data", data_echo(loaded)}});
  };

  write_json(args.out / "config.json", resolved);
  flush_history();
  if (!args.resume) save();

  training::FitOptions fo;
  fo.stop_at_step = args.stop_at_step;
  training::CollapseInfo collapse;
  bool paused = false;
  while (state->epoch < config.train.epochs) {
    training::TrainConfig tc = config.train;
    tc.epochs = state->epoch + 1;
    const auto r = training::fit(*state, train, &val, tc, fo);
    for (const auto& rec : r.history) {
      json line = rec;
      line["type"] = "epoch";
      history.push_back(line);
    }
    flush_history();
    if (r.collapse.collapsed) {
      collapse = r.collapse;
      break;
    }
    if (r.history.empty()) {
      paused = true;
      save();
      break;
    }
    save();
  }

  json summary{{"config", resolved}, {"epochs_completed", state->epoch}, {"step", state->step}};
  std::optional<double> best_auc;
  std::optional<std::size_t> best_epoch;
  json last = json();
  for (const auto& h : history) {
    if (h.value("type", "") != "epoch") continue;
    last = h;
    if (h["val_auc"].is_number() && (!best_auc || h["val_auc"].get<double>() > *best_auc)) {
      best_auc = h["val_auc"].get<double>();
      best_epoch = h["epoch"].get<std::size_t>();
    }
  }
  summary["final"] = last;
  summary["best_epoch"] = best_epoch ? json(*best_epoch) : json();
  summary["best_val_auc"] = opt(best_auc);
  summary["paused"] = paused;
  summary["collapsed"] = collapse.collapsed;
  if (collapse.collapsed) {
    summary["collapse"] = {{"step", collapse.step}, {"epoch", collapse.epoch}, {"reason", collapse.reason}};
  }
  write_json(args.out / "summary.json", summary);
  if (collapse.collapsed) {
    std::cerr << "training collapsed at step " << collapse.step << ": " << collapse.reason
              << " (last good checkpoint kept)\n";
    return kCollapse;
  }
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args) {
  const training::Checkpoint ck = load_checkpoint_or_throw(args.checkpoint, "checkpoint");
  const LoadedData loaded = load_data(args.data, config);
  const auto part = split_part(loaded.all, config.data.split_seed, args.split);
  const auto& mc = ck.state.model.config();
  if (part.fields != mc.field_count() || part.continuous_count != mc.continuous_count) {
    throw DataError("data layout does not match the checkpoint's model");
  }
  for (std::size_t f = 0; f < part.fields; ++f) {
    if (part.vocab_sizes[f] > mc.vocab_sizes[f]) throw DataError("data vocabulary exceeds the checkpoint's model");
  }
  const auto logits = training::predict_logits(ck.state.model, part);
  json out{{"config", config.to_json()},
           {"checkpoint", {{"config", ck.extra.value("config", json())}, {"step", ck.state.step}, {"epoch", ck.state.epoch}}},
           {"data", data_echo(loaded)},
           {"split", args.split},
           {"rows", part.rows()}};
  out["auc"] = opt(try_auc(logits, part.labels));
  out["logloss"] = part.rows() ? json(training::logloss_from_logits(logits, part.labels)) : json();
  if (!args.out.parent_path().empty()) fs::create_directories(args.out.parent_path());
  write_json(args.out, out);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_diagnose(const RunConfig& config, const DiagnoseArgs& args) {
  const auto& opts = config.diagnostics;
  if (opts.mode == "trained" && !args.checkpoint) throw ConfigError("diagnostics.mode=trained needs --checkpoint");
  if (opts.input == "data" && !args.data) throw ConfigError("diagnostics.input=data needs --data");

  std::optional<LoadedData> loaded;
  if (args.data) loaded = load_data(*args.data, config);

  network::ModelConfig mc;
  std::optional<network::ModelParams> trained;
  json checkpoint_echo;
  if (args.checkpoint) {
    const training::Checkpoint ck = load_checkpoint_or_throw(*args.checkpoint, "checkpoint");
    mc = ck.state.model.config();
    checkpoint_echo = {{"config", ck.extra.value("config", json())}, {"step", ck.state.step}};
    if (opts.mode == "trained") {
      trained = ck.state.model.params();
    } else {
      mc.seed = config.model.seed;
    }
  } else if (loaded) {
    mc = model_for_data(config.model, loaded->all);
  } else {
    mc = config.model;
    try {
      mc.validate();
    } catch (const ContractViolation& e) {
      throw ConfigError(e.what());
    }
    if (mc.input_width() == 0) throw ConfigError("model: gaussian input needs continuous_count >= 1 or fields");
  }
  const network::Model model = trained ? network::Model(mc, *trained) : network::Model(mc);

  if (opts.layer && *opts.layer > mc.depth()) {
    throw ConfigError("diagnostics.layer " + std::to_string(*opts.layer) + " is out of range (0.." +
                      std::to_string(mc.depth()) + ")");
  }

  Matrix x0;
  std::optional<data::EncodedDataset> rows;
  if (opts.input == "data") {
    const auto part = split_part(loaded->all, config.data.split_seed, opts.split);
    std::vector<std::size_t> idx(std::min(opts.samples, part.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    rows = part.subset(idx);
    if (rows->rows() < 2) throw DataError("diagnose needs at least two rows");
    x0 = network::embed_lookup(mc, model.params(), rows->categorical, rows->continuous_matrix(idx));
  } else {
    Rng r = Rng(config.seed.value_or(config.model.seed)).split("diagnose-input");
    x0 = gaussian_matrix(r, opts.samples, mc.input_width(), 1.0);
  }

  diagnostics::DiagnosticsReport report;
  report.config = config.to_json();
  report.config["model"] = mc;
  if (loaded) report.config["data_source"] = data_echo(*loaded);
  if (!checkpoint_echo.is_null()) report.config["checkpoint"] = checkpoint_echo;
  report.mode = opts.mode;
  report.variance = diagnostics::layer_variance_profile(model, x0, opts.probe_seed);
  const auto kind = mc.hidden_act.kind;
  if (kind == ActivationKind::Relu || kind == ActivationKind::LeakyRelu) {
    report.activation_rates = diagnostics::dead_neuron_histogram(model, x0);
  }
  if (opts.layer) {
    report.cosine.push_back(diagnostics::pairwise_cosine_similarity(model, x0, *opts.layer));
  } else {
    report.cosine = diagnostics::cosine_profile(model, x0);
  }
  if (rows) {
    const auto cache = model.forward_dense(x0);
    report.auc = try_auc(cache.logits, rows->labels);
    report.logloss = training::logloss_from_logits(cache.logits, rows->labels);
  }
  fs::create_directories(args.out);
  diagnostics::write_report(args.out, report);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_sweep_depth(const RunConfig& config, const SweepArgs& args) {
  const LoadedData loaded = load_data(args.data, config);
  const auto train = split_part(loaded.all, config.data.split_seed, "train");
  const auto eval = split_part(loaded.all, config.data.split_seed, config.sweep.eval_split);
  const network::ModelConfig base = model_for_data(config.model, loaded.all);

  diagnostics::DepthSweepOptions o;
  o.variants.clear();
  for (const auto& v : config.sweep.variants) o.variants.push_back(network::SkipVariant::parse(v));
  o.seeds = config.sweep.seeds;
  if (o.seeds.empty()) o.seeds = {config.seed.value_or(config.train.seed)};
  o.width = config.sweep.width;
  o.jobs = args.jobs;

  diagnostics::DiagnosticsReport report;
  report.config = config.to_json();
  report.config["model"] = base;
  report.config["data_source"] = data_echo(loaded);
  report.mode = "sweep";
  report.depth_table = diagnostics::depth_sweep(config.sweep.depths, base, train, eval, config.train, o);
  fs::create_directories(args.out);
  diagnostics::write_report(args.out, report);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_verify_theory(const RunConfig& config, const TheoryArgs& args) {
  json report = run_theory_checks(config.theory, args.jobs);
  report["config"] = config.to_json();
  if (!args.out.parent_path().empty()) fs::create_directories(args.out.parent_path());
  write_json(args.out, report);
  const bool pass = report.at("pass").get<bool>();
  for (const auto& c : report.at("checks")) {
    std::cout << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << c.at("name").get<std::string>() << "\n";
  }
  if (!pass) {
    std::cerr << "theory checks failed; replay with --seed " << config.theory.seed << " (see " << args.out.string()
              << ")\n";
    return kTheoryFailure;
  }
  return kOk;
}

}  // namespace sml::cli
