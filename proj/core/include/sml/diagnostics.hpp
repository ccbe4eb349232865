#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/data.hpp"
#include "sml/matrix.hpp"
#include "sml/network.hpp"
#include "sml/rng.hpp"
#include "sml/training.hpp"

namespace sml::diagnostics {

/// Rank-based AUC (Mann-Whitney U) with average ranks for ties.
/// Throws UndefinedMetric unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// ---------------------------------------------------------------------------
// Per-layer profiles. Layer rows are indexed 0..depth-1 for tower layers 1..depth.

struct LayerVariance {
  std::size_t layer = 0;
  double contribution_variance = 0.0;     // cross-sample variance of the layer's logit contribution
  double activation_norm_variance = 0.0;  // cross-sample variance of ||h_layer||
};

struct VarianceProfile {
  std::string source;  // "skip" (skip-path contributions) or "probe" (frozen random projections)
  std::vector<LayerVariance> layers;
  std::optional<double> input_contribution_variance;
  double logit_variance = 0.0;
};

/// For a model with skip paths the per-layer contribution is the skip-path
/// value. A plain DNN has none, so each layer gets a frozen probe head
/// r_i ~ N(0, 1 / width_i) drawn from Rng(probe_seed).split("probe").split(i).
VarianceProfile layer_variance_profile(const network::Model& model, const Matrix& x0, std::uint64_t probe_seed = 0);
VarianceProfile layer_variance_profile(const network::Model& model, const data::EncodedDataset& batch,
                                       std::uint64_t probe_seed = 0);

inline constexpr std::size_t kRateBins = 10;
inline constexpr double kDeadRate = 0.01;
inline constexpr double kSaturatedRate = 0.99;

struct LayerActivationRates {
  std::size_t layer = 0;
  std::vector<double> rates;                    // per unit, fraction of samples with pre-activation >= 0
  std::array<std::size_t, kRateBins> histogram{};  // [0, 0.1), ..., [0.9, 1.0]
  double bipolarity = 0.0;                      // fraction of units with rate < 0.01 or > 0.99
};

/// Requires relu or leaky-relu hidden units. A pre-activation of exactly 0
/// counts as active, matching the derivative-at-0 convention.
std::vector<LayerActivationRates> dead_neuron_histogram(const network::Model& model, const Matrix& x0);
std::vector<LayerActivationRates> dead_neuron_histogram(const network::Model& model,
                                                        const data::EncodedDataset& batch);

struct CosineSimilarity {
  std::size_t layer = 0;           // 0 = model input x0, i = output of tower layer i
  double mean = 0.0;               // over unordered pairs of non-zero rows
  std::size_t used = 0;
  std::size_t zero_excluded = 0;
  bool degenerate = false;         // fewer than two non-zero rows
};

/// Mean cosine similarity over all unordered row pairs, computed exactly as
/// (||sum u_i||^2 - n) / (n (n - 1)) over the normalized rows u_i.
CosineSimilarity mean_pairwise_cosine(const Matrix& rows);
CosineSimilarity pairwise_cosine_similarity(const network::Model& model, const Matrix& x0, std::size_t layer);
std::vector<CosineSimilarity> cosine_profile(const network::Model& model, const Matrix& x0);

struct ReluVarianceResult {
  double estimate = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;   // delta^2 (1 - 2/pi)
  double exact = 0.0;   // delta^2 (1/2 - 1/(2 pi))
  bool within_bound = false;  // estimate <= bound + 3 SE
};

/// Two-pass Monte-Carlo estimate of Var(relu(X)), X ~ N(0, delta^2). n >= 10^4.
ReluVarianceResult relu_variance_mc(double delta, std::size_t n, Rng& rng);

// ---------------------------------------------------------------------------
// Variance laws at initialization.

enum class VarianceLaw { ResnetDoubling, SkiplogitLinear, MtnBound };
std::string to_string(VarianceLaw law);
VarianceLaw parse_variance_law(std::string_view name);

struct VarianceLawOptions {
  std::size_t width = 128;
  std::size_t samples = 100000;   // total Gaussian inputs per depth, split across inits
  std::size_t inits = 256;        // independent initializations averaged per depth
  double branch_scale = 1.0;      // resnet residual-branch multiplier
  double ratio_tolerance = 0.4;   // resnet: |ratio - predicted| allowed
  double slope_tolerance = 0.15;  // skiplogit: relative slope error allowed
  double se_multiplier = 3.0;     // mtn: Monte-Carlo slack in standard errors
};

struct VarianceLawPoint {
  std::size_t depth = 0;
  double measured = 0.0;
  double predicted = 0.0;
  double standard_error = 0.0;
  bool pass = false;
  std::vector<double> detail;  // resnet: per-block ratios; skiplogit: per-path variances
};

struct VarianceLawResult {
  VarianceLaw law = VarianceLaw::ResnetDoubling;
  std::vector<VarianceLawPoint> points;
  double statistic = 0.0;  // skiplogit: least-squares slope; others: worst point margin
  double target = 0.0;     // skiplogit: mean per-path variance
  bool pass = false;
};

/// resnet_doubling: blocks x <- x + s W relu(x), W ~ N(0, 2 / width), inputs
///   N(0, I). Measured per depth l is the geometric-mean per-block ratio of
///   the mean second moment, (m_l / m_0)^(1/l); predicted 1 + s^2.
/// skiplogit_linear: identity tower with gain-1 init and one vanilla skip path
///   per layer (no head, no input path). Var(logit) and the per-path
///   variances are averaged over `inits` initializations; the least-squares
///   slope of Var(logit) against L is compared with the mean per-path variance.
/// mtn_bound: relu tower of L - 1 layers plus the input path, all meta-tanh
///   (L paths in total). Checks Var(logit) <= Var(input path) + L - 1 within
///   se_multiplier standard errors across inits.
VarianceLawResult variance_law_check(VarianceLaw law, std::span<const std::size_t> depths, Rng& rng,
                                     const VarianceLawOptions& options = {});

// ---------------------------------------------------------------------------
// Depth sweeps.

struct DepthSweepRow {
  std::size_t depth = 0;
  std::string variant;
  std::uint64_t seed = 0;
  std::optional<double> auc;
  std::optional<double> logloss;
  bool collapsed = false;
  std::string note;  // collapse reason or error text
  std::size_t epochs_completed = 0;
};

struct DepthSweepOptions {
  std::vector<network::SkipVariant> variants{network::SkipVariant::plain_dnn(), network::SkipVariant::meta_tanh()};
  std::vector<std::uint64_t> seeds{0};
  std::size_t width = 64;  // uniform hidden width
  std::size_t jobs = 1;
};

/// Trains every (depth, variant, seed) combination with a uniform-width
/// tower; model and shuffle seeds are both the row seed. Each row is scored
/// on `eval` with the final parameters. Rows come back in (depth list,
/// variant, seed) order whatever the job count. A failing row is recorded, not thrown.
std::vector<DepthSweepRow> depth_sweep(std::span<const std::size_t> depths, const network::ModelConfig& base,
                                       const data::EncodedDataset& train, const data::EncodedDataset& eval,
                                       const training::TrainConfig& train_config, const DepthSweepOptions& options);

// ---------------------------------------------------------------------------
// Report.

struct DiagnosticsReport {
  nlohmann::json config = nlohmann::json::object();
  std::string mode;  // "init" or "trained"
  std::optional<VarianceProfile> variance;
  std::vector<LayerActivationRates> activation_rates;
  std::vector<CosineSimilarity> cosine;
  std::optional<double> auc;
  std::optional<double> logloss;
  std::vector<DepthSweepRow> depth_table;
};

nlohmann::json report_to_json(const DiagnosticsReport& report);
std::string variance_csv(const VarianceProfile& profile);
std::string activation_rates_csv(std::span<const LayerActivationRates> rates);
std::string cosine_csv(std::span<const CosineSimilarity> cosine);
std::string depth_table_csv(std::span<const DepthSweepRow> rows);

/// Writes report.json plus one CSV per non-empty profile into `dir`.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& dir, const DiagnosticsReport& report);

/// Shortest round-trip decimal form used in every CSV cell.
std::string format_double(double v);

}  // namespace sml::diagnostics
