#include <charconv>
#include <cmath>
#include <fstream>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::diagnostics {

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? nlohmann::json(*v) : nlohmann::json();
}

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json report_to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["format"] = "sml-diagnostics";
  j["version"] = 1;
  j["config"] = r.config;
  j["mode"] = r.mode;
  if (r.variance) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : r.variance->layers) {
      layers.push_back({{"layer", l.layer},
                        {"contribution_variance", opt(l.contribution_variance)},
                        {"activation_norm_variance", opt(l.activation_norm_variance)}});
    }
    j["variance_profile"] = {{"source", r.variance->source},
                             {"layers", layers},
                             {"input_contribution_variance", opt(r.variance->input_contribution_variance)},
                             {"logit_variance", opt(r.variance->logit_variance)}};
  }
  if (!r.activation_rates.empty()) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : r.activation_rates) {
      layers.push_back({{"layer", l.layer}, {"histogram", l.histogram}, {"bipolarity", l.bipolarity}});
    }
    j["activation_rates"] = {{"bins", kRateBins}, {"dead_rate", kDeadRate}, {"saturated_rate", kSaturatedRate},
                             {"layers", layers}};
  }
  if (!r.cosine.empty()) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& c : r.cosine) {
      layers.push_back({{"layer", c.layer},
                        {"mean", c.degenerate ? nlohmann::json() : opt(c.mean)},
                        {"used", c.used},
                        {"zero_excluded", c.zero_excluded},
                        {"degenerate", c.degenerate}});
    }
    j["cosine_similarity"] = layers;
  }
  j["metrics"] = {{"auc", opt(r.auc)}, {"logloss", opt(r.logloss)}};
  if (!r.depth_table.empty()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.depth_table) {
      rows.push_back({{"depth", row.depth},
                      {"variant", row.variant},
                      {"seed", row.seed},
                      {"auc", opt(row.auc)},
                      {"logloss", opt(row.logloss)},
                      {"collapsed", row.collapsed},
                      {"note", row.note},
                      {"epochs_completed", row.epochs_completed}});
    }
    j["depth_table"] = rows;
  }
  return j;
}

std::string variance_csv(const VarianceProfile& p) {
  std::string s = "layer,source,contribution_variance,activation_norm_variance\n";
  for (const auto& l : p.layers) {
    s += std::to_string(l.layer) + ',' + p.source + ',' + format_double(l.contribution_variance) + ',' +
         format_double(l.activation_norm_variance) + '\n';
  }
  return s;
}

std::string activation_rates_csv(std::span<const LayerActivationRates> rates) {
  std::string s = "layer";
  for (std::size_t b = 0; b < kRateBins; ++b) s += ",bin" + std::to_string(b);
  s += ",bipolarity\n";
  for (const auto& l : rates) {
    s += std::to_string(l.layer);
    for (std::size_t c : l.histogram) s += ',' + std::to_string(c);
    s += ',' + format_double(l.bipolarity) + '\n';
  }
  return s;
}

std::string cosine_csv(std::span<const CosineSimilarity> cosine) {
  std::string s = "layer,mean,used,zero_excluded,degenerate\n";
  for (const auto& c : cosine) {
    s += std::to_string(c.layer) + ',' + (c.degenerate ? std::string() : format_double(c.mean)) + ',' +
         std::to_string(c.used) + ',' + std::to_string(c.zero_excluded) + ',' + (c.degenerate ? "1" : "0") + '\n';
  }
  return s;
}

std::string depth_table_csv(std::span<const DepthSweepRow> rows) {
  std::string s = "depth,variant,seed,auc,logloss,collapsed,epochs_completed\n";
  for (const auto& r : rows) {
    s += std::to_string(r.depth) + ',' + r.variant + ',' + std::to_string(r.seed) + ',' + opt_cell(r.auc) + ',' +
         opt_cell(r.logloss) + ',' + (r.collapsed ? "1" : "0") + ',' + std::to_string(r.epochs_completed) + '\n';
  }
  return s;
}

std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const DiagnosticsReport& r) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    written.push_back(dir / name);
  };
  emit("report.json", report_to_json(r).dump(2) + "\n");
  if (r.variance) emit("variance_profile.csv", variance_csv(*r.variance));
  if (!r.activation_rates.empty()) emit("activation_rates.csv", activation_rates_csv(r.activation_rates));
  if (!r.cosine.empty()) emit("cosine_similarity.csv", cosine_csv(r.cosine));
  if (!r.depth_table.empty()) emit("depth_table.csv", depth_table_csv(r.depth_table));
  return written;
}

}  // namespace sml::diagnostics
