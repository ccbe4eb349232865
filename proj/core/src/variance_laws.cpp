#include <cmath>
#include <limits>

#include "sml/diagnostics.hpp"
#include "sml/errors.hpp"

namespace sml::diagnostics {

namespace {

double sample_variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

double mean_square(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s / static_cast<double>(m.size());
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
}

VarianceLawPoint resnet_point(std::size_t depth, Rng stream, const VarianceLawOptions& o) {
  const std::size_t w = o.width;
  Matrix x = gaussian_matrix(stream, o.samples, w, 1.0);
  VarianceLawPoint p;
  p.depth = depth;
  p.predicted = 1.0 + o.branch_scale * o.branch_scale;
  const double m0 = mean_square(x);
  double prev = m0;
  const double std = std::sqrt(2.0 / static_cast<double>(w));
  for (std::size_t b = 0; b < depth; ++b) {
    const Matrix weight = gaussian_matrix(stream, w, w, std);
    Matrix r = x;
    for (double& v : r.data()) v = v > 0.0 ? v : 0.0;
    Matrix branch = gemm(r, weight);
    branch *= o.branch_scale;
    x += branch;
    const double m = mean_square(x);
    p.detail.push_back(m / prev);
    prev = m;
  }
  p.measured = std::pow(prev / m0, 1.0 / static_cast<double>(depth));
  p.pass = std::abs(p.measured - p.predicted) <= o.ratio_tolerance;
  return p;
}

network::ModelConfig dense_config(std::size_t width, std::size_t depth, std::uint64_t seed) {
  network::ModelConfig c;
  c.vocab_sizes.clear();
  c.continuous_count = width;
  c.tower_widths.assign(depth, width);
  c.include_tower_head = false;
  c.seed = seed;
  return c;
}

}  // namespace

std::string to_string(VarianceLaw law) {
  switch (law) {
    case VarianceLaw::ResnetDoubling: return "resnet_doubling";
    case VarianceLaw::SkiplogitLinear: return "skiplogit_linear";
    case VarianceLaw::MtnBound: return "mtn_bound";
  }
  return "unknown";
}

VarianceLaw parse_variance_law(std::string_view name) {
  if (name == "resnet_doubling") return VarianceLaw::ResnetDoubling;
  if (name == "skiplogit_linear") return VarianceLaw::SkiplogitLinear;
  if (name == "mtn_bound") return VarianceLaw::MtnBound;
  throw ContractViolation("unknown variance law '" + std::string(name) + "'");
}

VarianceLawResult variance_law_check(VarianceLaw law, std::span<const std::size_t> depths, Rng& rng,
                                     const VarianceLawOptions& o) {
  require(o.width >= 1, "variance_law_check: width must be >= 1");
  require(o.inits >= 1, "variance_law_check: inits must be >= 1");
  require(o.samples >= 2 * o.inits, "variance_law_check: need at least 2 samples per init");
  VarianceLawResult result;
  result.law = law;
  const Rng base = rng.split(to_string(law));

  if (law == VarianceLaw::ResnetDoubling) {
    double worst = 0.0;
    for (std::size_t depth : depths) {
      require(depth >= 1, "variance_law_check: depth must be >= 1");
      result.points.push_back(resnet_point(depth, base.split(static_cast<std::uint64_t>(depth)), o));
      worst = std::max(worst, std::abs(result.points.back().measured - result.points.back().predicted));
    }
    result.statistic = worst;
    result.target = o.ratio_tolerance;
  } else {
    const std::size_t per_init = o.samples / o.inits;
    for (std::size_t depth : depths) {
      const bool mtn = law == VarianceLaw::MtnBound;
      require(mtn ? depth >= 2 : depth >= 1, "variance_law_check: depth too small for this law");
      const Rng stream = base.split(static_cast<std::uint64_t>(depth));
      const std::size_t tower = mtn ? depth - 1 : depth;
      std::vector<double> logit_vars, bound_gaps, input_vars;
      std::vector<double> path_vars(tower, 0.0);
      for (std::size_t k = 0; k < o.inits; ++k) {
        Rng r = stream.split(static_cast<std::uint64_t>(k));
        network::ModelConfig cfg = dense_config(o.width, tower, r.next_u64());
        if (mtn) {
          cfg.hidden_act = Activation::relu();
          cfg.skip = network::SkipVariant::meta_tanh();
          cfg.include_input_skip = true;
        } else {
          cfg.hidden_act = Activation::identity();
          cfg.skip = network::SkipVariant::vanilla();
          cfg.include_input_skip = false;
        }
        const network::Model model(cfg);
        const auto cache = model.forward_dense(gaussian_matrix(r, per_init, o.width, 1.0));
        const double lv = sample_variance(cache.logits);
        logit_vars.push_back(lv);
        for (std::size_t i = 0; i < tower; ++i) path_vars[i] += sample_variance(cache.layer_skips[i].contribution);
        if (mtn) {
          const double iv = sample_variance(cache.input_skip->contribution);
          input_vars.push_back(iv);
          bound_gaps.push_back(lv - iv);
        }
      }
      for (double& v : path_vars) v /= static_cast<double>(o.inits);
      VarianceLawPoint p;
      p.depth = depth;
      p.measured = mean_of(logit_vars);
      p.detail = path_vars;
      if (mtn) {
        p.predicted = mean_of(input_vars) + static_cast<double>(depth - 1);
        p.standard_error = standard_error(bound_gaps);
        p.pass = p.measured <= p.predicted + o.se_multiplier * p.standard_error;
      } else {
        p.predicted = static_cast<double>(depth) * mean_of(path_vars);
        p.standard_error = standard_error(logit_vars);
        p.pass = std::abs(p.measured / p.predicted - 1.0) <= o.slope_tolerance;
      }
      result.points.push_back(std::move(p));
    }
    if (law == VarianceLaw::MtnBound) {
      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& p : result.points) {
        worst = std::max(worst, p.measured - p.predicted - o.se_multiplier * p.standard_error);
      }
      result.statistic = result.points.empty() ? 0.0 : worst;
      result.target = 0.0;
    } else {
      // Least-squares slope of Var(logit) on L; with fewer than two distinct
      // depths the statistic degrades to the mean measured/predicted ratio.
      double all_paths = 0.0;
      std::size_t path_count = 0;
      for (const auto& p : result.points) {
        for (double v : p.detail) all_paths += v;
        path_count += p.detail.size();
      }
      const double per_path = path_count ? all_paths / static_cast<double>(path_count) : 0.0;
      double mx = 0.0, my = 0.0;
      for (const auto& p : result.points) {
        mx += static_cast<double>(p.depth);
        my += p.measured;
      }
      const double n = static_cast<double>(result.points.size());
      mx /= n;
      my /= n;
      double sxx = 0.0, sxy = 0.0;
      for (const auto& p : result.points) {
        const double dx = static_cast<double>(p.depth) - mx;
        sxx += dx * dx;
        sxy += dx * (p.measured - my);
      }
      if (sxx > 0.0) {
        result.statistic = sxy / sxx;
        result.target = per_path;
      } else {
        double ratio = 0.0;
        for (const auto& p : result.points) ratio += p.measured / p.predicted;
        result.statistic = result.points.empty() ? 1.0 : ratio / n;
        result.target = 1.0;
      }
    }
  }

  if (law == VarianceLaw::SkiplogitLinear) {
    result.pass = !result.points.empty() &&
                  std::abs(result.statistic / result.target - 1.0) <= o.slope_tolerance;
  } else {
    result.pass = !result.points.empty();
    for (const auto& p : result.points) result.pass = result.pass && p.pass;
  }
  return result;
}

}  // namespace sml::diagnostics
