#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "commands.hpp"
#include "run_config.hpp"
#include "sml/errors.hpp"

namespace {

using namespace sml::cli;

struct Common {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

void add_common(CLI::App* sub, Common& c, bool jobs) {
  sub->add_option("--config", c.config_file, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "seed for every random stream");
  if (jobs) sub->add_option("--jobs", c.jobs, "worker threads; never changes results")->check(CLI::PositiveNumber);
  sub->allow_extras();
}

std::vector<std::pair<std::string, std::string>> dotted_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.find('.') == std::string::npos) {
      throw ConfigError("unrecognized argument '" + a + "'");
    }
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(a.substr(2), extras[++i]);
    } else {
      throw ConfigError("override '" + a + "' has no value");
    }
  }
  return out;
}

RunConfig resolve(const CLI::App* sub, const Common& c, bool needs_seed) {
  if (needs_seed && !c.seed) throw ConfigError(sub->get_name() + " is randomized and requires an explicit --seed");
  std::optional<std::filesystem::path> file;
  if (!c.config_file.empty()) file = c.config_file;
  return resolve_config(file, dotted_overrides(sub->remaining()), c.seed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sml: skip meta logit networks, diagnostics and theory checks"};
  app.require_subcommand(1);

  Common common;

  GenDataArgs gen;
  std::string criteo;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic dataset or ingest a Criteo TSV file");
  add_common(gen_cmd, common, false);
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--criteo", criteo, "Criteo-format TSV to ingest instead of generating")->check(CLI::ExistingFile);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_common(train_cmd, common, false);
  train_cmd->add_option("--data", train.data, "dataset (.smld cache or Criteo TSV)")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_flag("--resume", train.resume, "continue from <out>/checkpoint.json");
  train_cmd->add_option("--stop-at-step", train.stop_at_step, "pause once this many steps are done");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a data split");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint.json")->required();
  eval_cmd->add_option("--data", eval.data, "dataset")->required();
  eval_cmd->add_option("--split", eval.split, "train | validation | test | all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  eval_cmd->add_option("--out", eval.out, "output JSON file")->required();

  DiagnoseArgs diag;
  std::string diag_ckpt, diag_data;
  auto* diag_cmd = app.add_subcommand("diagnose", "per-layer variance, activation and cosine profiles");
  add_common(diag_cmd, common, false);
  diag_cmd->add_option("--checkpoint", diag_ckpt, "checkpoint.json (required in trained mode)");
  diag_cmd->add_option("--data", diag_data, "dataset (required for data input)");
  diag_cmd->add_option("--out", diag.out, "output directory")->required();

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-depth", "train every (depth, variant, seed) combination");
  add_common(sweep_cmd, common, true);
  sweep_cmd->add_option("--data", sweep.data, "dataset")->required();
  sweep_cmd->add_option("--out", sweep.out, "output directory")->required();

  TheoryArgs theory;
  auto* theory_cmd = app.add_subcommand("verify-theory", "randomized numerical checks of the variance laws and theorems");
  add_common(theory_cmd, common, true);
  theory_cmd->add_option("--out", theory.out, "output JSON report")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (gen_cmd->parsed()) {
      if (!criteo.empty()) gen.criteo = criteo;
      return cmd_gen_data(resolve(gen_cmd, common, !gen.criteo), gen);
    }
    if (train_cmd->parsed()) return cmd_train(resolve(train_cmd, common, true), train);
    if (eval_cmd->parsed()) return cmd_evaluate(resolve(eval_cmd, common, false), eval);
    if (diag_cmd->parsed()) {
      if (!diag_ckpt.empty()) diag.checkpoint = diag_ckpt;
      if (!diag_data.empty()) diag.data = diag_data;
      return cmd_diagnose(resolve(diag_cmd, common, true), diag);
    }
    if (sweep_cmd->parsed()) {
      sweep.jobs = common.jobs;
      return cmd_sweep_depth(resolve(sweep_cmd, common, true), sweep);
    }
    if (theory_cmd->parsed()) {
      theory.jobs = common.jobs;
      return cmd_verify_theory(resolve(theory_cmd, common, true), theory);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const sml::ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const sml::ContractViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}
