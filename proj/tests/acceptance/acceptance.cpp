// Prints one PASS/FAIL line per acceptance criterion, then a summary.
// Usage: acceptance --workdir DIR

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "sml/diagnostics.hpp"
#include "sml/finite_diff.hpp"
#include "sml/network.hpp"
#include "support/reference_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sml;
using network::SkipVariant;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SML_EXE) + " " + args + " > " + quote(log) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void require_cli(const std::string& args, const fs::path& log) {
  const int code = run_cli(args, log);
  if (code != 0) throw std::runtime_error("sml " + args + " exited with " + std::to_string(code));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Number of differing or missing files between two output trees.
std::size_t tree_diff(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::size_t bad = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() == ".log") continue;
    ++files;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++bad;
  }
  return bad;
}

const json& check_named(const json& report, const std::string& name) {
  for (const auto& c : report.at("checks"))
    if (c.at("name") == name) return c;
  throw std::runtime_error("theory report has no check " + name);
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  double worst = 0.0;
  std::string where;
  std::size_t cases = 0;
  auto run_case = [&](testing::GradCheckCase g) {
    const auto r = testing::check_gradients(g, network::initialize(g.config));
    ++cases;
    if (r.worst > worst) {
      worst = r.worst;
      where = g.config.skip.name() + "/" + to_string(g.config.hidden_act.kind) + "/" + r.where;
    }
  };
  for (const auto& v : SkipVariant::ablation_grid())
    for (std::uint64_t s = 0; s < 20; ++s) run_case(testing::make_grad_case(v, s));
  for (auto act : {Activation::leaky_relu(0.01), Activation::tanh(), Activation::sigmoid(), Activation::identity()})
    for (std::uint64_t s = 0; s < 20; ++s) {
      auto g = testing::make_grad_case(SkipVariant::meta_tanh(), s);
      g.config.hidden_act = act;
      run_case(g);
    }
  return {worst < 1e-4, fmt("%zu cases, max rel err %.3g (%s)", cases, worst, where.c_str())};
}

Outcome stop_gradient_check() {
  // Skip path alone: d_x must be exactly the frozen-s term.
  double meta_term = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = Rng(s).split("stop-gradient");
    const Matrix x = gaussian_matrix(rng, 6, 5, 1.0);
    network::SkipPathParams p;
    p.weight = gaussian_matrix(rng, 1, 5, 1.0);
    p.meta_weight = gaussian_matrix(rng, 5, 1, 1.0);
    for (auto act : {ActivationKind::Identity, ActivationKind::Relu, ActivationKind::Sigmoid, ActivationKind::Tanh}) {
      const auto v = SkipVariant::meta(act);
      network::SkipCache cache;
      network::skip_path_forward(x, p, v, &cache);
      std::vector<double> d(6);
      for (double& e : d) e = rng.gaussian();
      network::SkipPathParams grad;
      grad.weight = Matrix(1, 5);
      grad.meta_weight = Matrix(5, 1);
      Matrix d_x(6, 5);
      network::skip_path_backward(x, p, v, cache, d, grad, d_x);
      const Activation a{act, p.alpha};
      for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t k = 0; k < 5; ++k) {
          const double direct = d[r] * p.weight(0, k) * derivative(a, cache.scaled(r, k)) * cache.meta_scale[r];
          meta_term = std::max(meta_term, std::abs(d_x(r, k) - direct));
        }
    }
  }
  // Whole model: d loss / d x0 against differences with every s frozen.
  double worst = 0.0;
  for (const auto& v : SkipVariant::ablation_grid()) {
    if (v.scale_mode != network::ScaleMode::Meta) continue;
    for (std::uint64_t s = 0; s < 20; ++s) {
      network::ModelConfig c;
      c.vocab_sizes = {};
      c.continuous_count = 5;
      c.tower_widths = {8, 8, 8};
      c.skip = v;
      c.seed = s;
      const network::Model model(c);
      Rng rng = Rng(s).split("stop-gradient-input");
      const Matrix x = gaussian_matrix(rng, 6, 5, 1.0);
      std::vector<std::uint8_t> y(6);
      for (auto& e : y) e = static_cast<std::uint8_t>(rng.uniform_below(2));
      const auto cache = model.forward({}, x);
      std::vector<double> d_logit(6);
      for (std::size_t r = 0; r < 6; ++r) d_logit[r] = (sigmoid(cache.logits[r]) - y[r]) / 6.0;
      const auto grads = model.backward(cache, d_logit);
      const auto frozen = testing::reference_forward(c, model.params(), {}, x).scales;
      const auto loss = [&](const Matrix& m) { return testing::reference_loss(c, model.params(), {}, m, y, &frozen); };
      // Richardson-extrapolated central differences, O(h^4).
      const Matrix fd = (4.0 * finite_diff_grad(loss, x, 1e-4) - finite_diff_grad(loss, x, 2e-4)) * (1.0 / 3.0);
      worst = std::max(worst, max_relative_error(fd, grads.d_x0, 1e-6));
    }
  }
  return {meta_term == 0.0 && worst < 1e-6,
          fmt("meta-argument term max |diff| %.3g, frozen-s input gradient max rel err %.3g", meta_term, worst)};
}

Outcome relu_variance(const json& theory) {
  const auto& c = check_named(theory, "relu_variance");
  const double est = c["estimate"], exact = c["exact"], se = c["standard_error"], bound = c["bound"];
  const double rel = std::abs(est - exact) / exact;
  return {rel <= 0.005 && est <= bound + 3 * se,
          fmt("n=%zu estimate %.6f exact %.6f rel %.2e bound %.6f se %.2e", c["samples"].get<std::size_t>(), est,
              exact, rel, bound, se)};
}

Outcome resnet_doubling() {
  std::string detail;
  bool pass = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng = Rng(s).split("resnet_doubling");
    diagnostics::VarianceLawOptions o;
    o.width = 64;
    o.samples = 20000;
    o.inits = 1;
    const std::size_t depth[] = {8};
    const auto r = diagnostics::variance_law_check(diagnostics::VarianceLaw::ResnetDoubling, depth, rng, o);
    const double m = r.points[0].measured;
    pass = pass && m >= 1.6 && m <= 2.4;
    detail += fmt("%s%.4f", s ? " " : "per-block ratio at depth 8, seeds 0-4: ", m);
  }
  return {pass, detail};
}

Outcome law_line(const json& theory, const std::string& name) {
  const auto& c = check_named(theory, name);
  std::string detail;
  for (const auto& p : c["points"])
    detail += fmt("%sL=%zu %.4g/%.4g", detail.empty() ? "" : " ", p["depth"].get<std::size_t>(),
                  p["measured"].get<double>(), p["predicted"].get<double>());
  if (name == "skiplogit_linear")
    detail = fmt("slope %.4f vs per-path %.4f; ", c["statistic"].get<double>(), c["target"].get<double>()) + detail;
  return {c["pass"].get<bool>(), "measured/predicted " + detail};
}

Outcome risk_closed_form(const json& theory) {
  const auto& c = check_named(theory, "risk_closed_form");
  const auto& z = c["abs_z"];
  std::size_t over = 0;
  for (const auto& f : c["failures"]) (void)f, ++over;
  return {c["pass"].get<bool>(),
          fmt("%zu instances, %zu MC samples each, max |z| %.3f, %zu beyond 3 SE", c["instances"].get<std::size_t>(),
              c["samples"].get<std::size_t>(), z["max"].get<double>(), over)};
}

Outcome gradient_bound(const json& theory, double seconds) {
  const auto& t = check_named(theory, "gradient_bound");
  const auto& d = check_named(theory, "descent_optimality");
  return {t["pass"].get<bool>() && d["pass"].get<bool>() && seconds < 300.0,
          fmt("%zu instances min relative slack %.3g; %zu descents max gap %.3g, all converged %s; campaign %.0fs",
              t["instances"].get<std::size_t>(), t["relative_slack"]["min"].get<double>(),
              d["instances"].get<std::size_t>(), d["risk_gap"]["max"].get<double>(),
              d["failures"].empty() ? "yes" : "no", seconds)};
}

Outcome taylor(const json& theory) {
  const auto& c = check_named(theory, "tanh_taylor");
  return {c["pass"].get<bool>() && c["points"].get<std::size_t>() >= 10000,
          fmt("%zu points, %zu violations, max error/bound %.6f", c["points"].get<std::size_t>(),
              c["violations"].get<std::size_t>(), c["max_error_over_bound"].get<double>())};
}

struct SweepRow {
  std::size_t depth;
  std::string variant;
  std::uint64_t seed;
  std::optional<double> auc;
  bool collapsed;
};

std::vector<SweepRow> read_sweep(const fs::path& dir) {
  std::vector<SweepRow> rows;
  const json report = cli::read_json(dir / "report.json");
  for (const auto& r : report.at("depth_table")) {
    rows.push_back({r["depth"].get<std::size_t>(), r["variant"].get<std::string>(), r["seed"].get<std::uint64_t>(),
                    r["auc"].is_null() ? std::nullopt : std::optional<double>(r["auc"].get<double>()),
                    r["collapsed"].get<bool>()});
  }
  return rows;
}

Outcome variant_order(const fs::path& work, const fs::path& data, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  require_cli("sweep-depth --seed 0 --data " + quote(data) + " --out " + quote(work / "variant_order") +
                  " --sweep.depths=[4] --sweep.variants='[\"dnn\",\"vanilla\",\"meta_tanh\"]'"
                  " --sweep.seeds=[0,1,2,3,4] --sweep.width=64 --train.epochs=3 --train.batch_size=512",
              work / "variant_order.log");
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::map<std::string, double> sum;
  std::map<std::string, int> count;
  for (const auto& r : read_sweep(work / "variant_order")) {
    if (!r.auc) return {false, "missing AUC for " + r.variant};
    sum[r.variant] += *r.auc;
    ++count[r.variant];
  }
  const double dnn = sum["dnn"] / count["dnn"], van = sum["vanilla"] / count["vanilla"],
               mtn = sum["meta_tanh"] / count["meta_tanh"];
  return {mtn - van >= -0.001 && van - dnn >= -0.001 && seconds < 900.0,
          fmt("mean AUC dnn %.5f vanilla %.5f meta_tanh %.5f (gaps %+.5f, %+.5f), %.0fs", dnn, van, mtn, van - dnn,
              mtn - van, seconds)};
}

Outcome depth_stability(const fs::path& work, const fs::path& data) {
  const std::string common = " --sweep.seeds=[0,1,2,3,4] --sweep.width=64 --train.epochs=2 --train.batch_size=512";
  require_cli("sweep-depth --seed 0 --data " + quote(data) + " --out " + quote(work / "depth_sml") +
                  " --sweep.depths=[50] --sweep.variants='[\"meta_tanh\"]'" + common,
              work / "depth_sml.log");
  require_cli("sweep-depth --seed 0 --data " + quote(data) + " --out " + quote(work / "depth_dnn") +
                  " --sweep.depths=[4,30] --sweep.variants='[\"dnn\"]'" + common,
              work / "depth_dnn.log");
  std::size_t sml_ok = 0;
  for (const auto& r : read_sweep(work / "depth_sml")) sml_ok += !r.collapsed && r.auc;
  std::map<std::uint64_t, SweepRow> shallow, deep;
  for (const auto& r : read_sweep(work / "depth_dnn")) (r.depth == 4 ? shallow : deep).emplace(r.seed, r);
  std::size_t degraded = 0;
  std::string drops;
  for (const auto& [seed, d] : deep) {
    const auto& s = shallow.at(seed);
    const bool failed = d.collapsed || !d.auc || (s.auc && *s.auc - *d.auc >= 0.03);
    degraded += failed;
    drops += fmt("%s%.4f", drops.empty() ? "" : " ", d.auc && s.auc ? *s.auc - *d.auc : NAN);
  }
  return {sml_ok == 5 && degraded >= 3,
          fmt("SML depth 50 trained without collapse on %zu/5 seeds; DNN depth 30 degraded on %zu/5 seeds "
              "(AUC drop vs depth 4: %s)",
              sml_ok, degraded, drops.c_str())};
}

Outcome init_rank_collapse() {
  const std::size_t depth = 16, width = 64, inits = 16, samples = 2000;
  std::vector<double> bip[2], cos[2];
  for (int m = 0; m < 2; ++m) {
    bip[m].assign(depth + 1, 0.0);
    cos[m].assign(depth + 1, 0.0);
  }
  for (std::size_t k = 0; k < inits; ++k) {
    Rng rng = Rng(k).split("rank-collapse-input");
    const Matrix x = gaussian_matrix(rng, samples, width, 1.0);
    for (int m = 0; m < 2; ++m) {
      network::ModelConfig c;
      c.vocab_sizes = {};
      c.continuous_count = width;
      c.tower_widths.assign(depth, width);
      c.skip = m == 0 ? SkipVariant::plain_dnn() : SkipVariant::meta_tanh();
      c.seed = k;
      const network::Model model(c);
      const auto rates = diagnostics::dead_neuron_histogram(model, x);
      const auto prof = diagnostics::cosine_profile(model, x);
      for (std::size_t l = 1; l <= depth; ++l) {
        bip[m][l] += rates[l - 1].bipolarity / inits;
        cos[m][l] += prof[l].mean / inits;
      }
    }
  }
  bool monotone = true, exceeds = true;
  for (std::size_t l = 2; l <= depth; ++l) monotone = monotone && bip[0][l] >= bip[0][l - 1] && cos[0][l] >= cos[0][l - 1];
  for (std::size_t l = 5; l <= depth; ++l) exceeds = exceeds && bip[0][l] > bip[1][l] && cos[0][l] > cos[1][l];
  return {monotone && exceeds,
          fmt("DNN non-decreasing %s, DNN > SML at layers 5-16 %s; layer 5/16 bipolarity dnn %.4f/%.4f sml "
              "%.4f/%.4f, cosine dnn %.4f/%.4f sml %.4f/%.4f",
              monotone ? "yes" : "no", exceeds ? "yes" : "no", bip[0][5], bip[0][16], bip[1][5], bip[1][16],
              cos[0][5], cos[0][16], cos[1][5], cos[1][16])};
}

Outcome auc_oracle() {
  Rng rng = Rng(0).split("auc-oracle");
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 2 + rng.uniform_below(40);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = c % 3 == 0 ? static_cast<double>(rng.uniform_below(4)) : rng.gaussian();
      y[i] = static_cast<std::uint8_t>(rng.uniform_below(2));
    }
    y[0] = 1;
    y[1] = 0;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          pairs += 1;
          wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
        }
    worst = std::max(worst, std::abs(diagnostics::auc(s, y) - wins / pairs));
  }
  return {worst <= 1e-12, fmt("1000 cases, max |rank - brute force| %.3g", worst)};
}

Outcome determinism(const fs::path& work) {
  const std::string small = " --synthetic.samples=5000 --synthetic.fields=6 --synthetic.vocab_size=60";
  const std::string model = " --model.tower_widths=[16,16,16] --train.epochs=2 --train.batch_size=256";
  const std::string theory =
      " --theory.gradient_bound_instances=50 --theory.gradient_instances=10 --theory.risk_instances=5"
      " --theory.risk_samples=50000 --theory.descent_instances=3 --theory.relu_samples=100000"
      " --theory.variance_samples=10000 --theory.variance_inits=32";
  std::size_t files = 0, bad = 0;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = work / "det" / tag;
    fs::remove_all(d);
    fs::create_directories(d);
    const std::string data = quote(d / "gen" / "data.smld");
    require_cli("gen-data --seed 7 --out " + quote(d / "gen") + small, d / "gen.log");
    require_cli("train --seed 7 --data " + data + " --out " + quote(d / "train") + model, d / "train.log");
    require_cli("evaluate --checkpoint " + quote(d / "train" / "checkpoint.json") + " --data " + data + " --out " +
                    quote(d / "eval.json"),
                d / "eval.log");
    require_cli("diagnose --seed 7 --diagnostics.mode=trained --checkpoint " +
                    quote(d / "train" / "checkpoint.json") + " --data " + data + " --out " + quote(d / "diag"),
                d / "diag.log");
    require_cli("diagnose --seed 7 --diagnostics.input=gaussian --model.continuous_count=8 --out " +
                    quote(d / "diag_init") + model,
                d / "diag_init.log");
    const std::string jobs = tag[0] == 'a' ? "1" : "2";
    require_cli("sweep-depth --seed 7 --jobs " + jobs + " --data " + data + " --out " + quote(d / "sweep") +
                    " --sweep.depths=[2,3] --sweep.seeds=[0,1] --sweep.width=16 --train.epochs=1",
                d / "sweep.log");
    require_cli("verify-theory --seed 7 --jobs " + jobs + " --out " + quote(d / "theory.json") + theory,
                d / "theory.log");
  }
  bad = tree_diff(work / "det" / "a", work / "det" / "b", files);
  return {bad == 0 && files > 0,
          fmt("%zu output files compared across reruns (sweep and theory with --jobs 1 vs 2), %zu differ", files, bad)};
}

Outcome trained_variance_info(const fs::path& data_path) {
  const auto d = data::read_dataset_cache(data_path).data;
  std::vector<std::size_t> rows(30000);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto train = d.subset(rows);
  network::ModelConfig mc;
  mc.vocab_sizes = d.vocab_sizes;
  mc.tower_widths.assign(8, 64);
  mc.skip = SkipVariant::plain_dnn();
  training::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 512;
  auto state = training::make_train_state(mc, tc);
  training::fit(state, train, nullptr, tc);
  rows.resize(3000);
  const auto p = diagnostics::layer_variance_profile(state.model, d.subset(rows));
  const double first = p.layers.front().contribution_variance, last = p.layers.back().contribution_variance;
  return {last < first, fmt("trained depth-8 DNN probe variance layer 1 %.3g, layer 8 %.3g", first, last)};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "sml_acceptance";
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--workdir") work = argv[i + 1];
  fs::create_directories(work);

  std::size_t passed = 0, total = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o = f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++total;
    passed += o.pass;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), s);
    std::fflush(stdout);
  };

  try {
    report("gradient-fd", gradient_check);
    report("stop-gradient", stop_gradient_check);

    cli::TheoryOptions to;
    const auto t0 = std::chrono::steady_clock::now();
    const json theory = cli::run_theory_checks(to, 1);
    const double theory_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cli::write_json(work / "theory.json", theory);

    report("relu-variance", [&] { return relu_variance(theory); });
    report("resnet-doubling", resnet_doubling);
    report("skiplogit-linear", [&] { return law_line(theory, "skiplogit_linear"); });
    report("mtn-bound", [&] { return law_line(theory, "mtn_bound"); });
    report("risk-closed-form", [&] { return risk_closed_form(theory); });
    report("gradient_bound", [&] { return gradient_bound(theory, theory_s); });
    report("tanh-taylor", [&] { return taylor(theory); });

    require_cli("gen-data --seed 0 --out " + quote(work / "data"), work / "gen.log");
    const fs::path data = work / "data" / "data.smld";
    double t2_s = 0.0;
    report("variant-ordering", [&] { return variant_order(work, data, t2_s); });
    report("depth-stability", [&] { return depth_stability(work, data); });
    report("init-rank-collapse", init_rank_collapse);
    report("auc-oracle", auc_oracle);
    report("determinism", [&] { return determinism(work); });

    const auto info = trained_variance_info(data);
    std::printf("INFO trained-logit-variance (not a criterion): %s, deep < shallow %s\n", info.detail.c_str(),
                info.pass ? "yes" : "no");
  } catch (const std::exception& e) {
    std::printf("ERROR acceptance harness: %s\n", e.what());
    return 1;
  }
  std::printf("SUMMARY %zu/%zu criteria passed\n", passed, total);
  return 0;
}
