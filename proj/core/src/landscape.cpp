#include <cmath>
#include <numbers>

#include "sml/errors.hpp"
#include "sml/landscape.hpp"
#include "sml/linalg.hpp"
#include "sml/network.hpp"

namespace sml::landscape {

namespace {

void require_square_list(std::span<const Matrix> A) {
  require(!A.empty(), "nested_product: need at least one layer");
  const std::size_t d = A[0].rows();
  for (const auto& a : A) {
    require(a.rows() == d && a.cols() == d, "nested_product: all layers must be square with equal dimension");
  }
}

struct RiskParts {
  Matrix error;      // N - R
  Matrix sqrt_sigma;
  double risk;
  double excess;
};

RiskParts risk_parts(const LinearInstance& inst) {
  inst.validate();
  RiskParts p{nested_product(inst.A) - inst.R, symmetric_sqrt(inst.Sigma), 0.0, 0.0};
  const double e = frobenius_norm(gemm(p.error, p.sqrt_sigma));
  p.excess = e * e;
  p.risk = p.excess + inst.noise_constant;
  return p;
}

}  // namespace

void LinearInstance::validate() const {
  require(d >= 1 && l >= 1, "instance: d and l must be >= 1");
  require(A.size() == l, "instance: layer count does not match l");
  require(R.rows() == d && R.cols() == d, "instance: R must be d x d");
  require(Sigma.rows() == d && Sigma.cols() == d, "instance: Sigma must be d x d");
  for (const auto& a : A) require(a.rows() == d && a.cols() == d, "instance: every A_i must be d x d");
  require(is_symmetric(Sigma, 1e-12 * (1.0 + frobenius_norm(Sigma))), "instance: Sigma must be symmetric");
}

Matrix nested_product(std::span<const Matrix> A) {
  require_square_list(A);
  const std::size_t d = A[0].rows();
  Matrix t = Matrix::identity(d);
  for (std::size_t k = A.size(); k-- > 0;) t = Matrix::identity(d) + gemm(A[k], t);
  return t;
}

Matrix prefix_product(std::span<const Matrix> A, std::size_t j) {
  require_square_list(A);
  require(j < A.size(), "prefix_product: layer index out of range");
  Matrix p = Matrix::identity(A[0].rows());
  for (std::size_t k = 0; k < j; ++k) p = gemm(p, A[k]);
  return p;
}

Matrix suffix_product(std::span<const Matrix> A, std::size_t j) {
  require_square_list(A);
  require(j < A.size(), "suffix_product: layer index out of range");
  const std::size_t d = A[0].rows();
  Matrix t = Matrix::identity(d);
  for (std::size_t k = A.size(); k-- > j + 1;) t = Matrix::identity(d) + gemm(A[k], t);
  return t;
}

double population_risk(const LinearInstance& inst) { return risk_parts(inst).risk; }

double excess_risk(const LinearInstance& inst) { return risk_parts(inst).excess; }

std::vector<Matrix> risk_gradient(const LinearInstance& inst) {
  inst.validate();
  const Matrix e_sigma = gemm(nested_product(inst.A) - inst.R, inst.Sigma);
  std::vector<Matrix> g;
  g.reserve(inst.l);
  for (std::size_t j = 0; j < inst.l; ++j) {
    Matrix gj = gemm_nt(gemm_tn(prefix_product(inst.A, j), e_sigma), suffix_product(inst.A, j));
    gj *= 2.0;
    g.push_back(std::move(gj));
  }
  return g;
}

GradientBoundReport gradient_bound_check(const LinearInstance& inst, double c_opt, double gamma_limit) {
  const RiskParts parts = risk_parts(inst);
  GradientBoundReport r;
  r.risk = parts.risk;
  r.c_opt = c_opt;
  for (const auto& g : risk_gradient(inst)) {
    const double n = frobenius_norm(g);
    r.lhs += n * n;
  }
  r.sigma_min_sigma = spectral_extremes(inst.Sigma).sigma_min;
  const double sqrt_sigma_min = spectral_extremes(parts.sqrt_sigma).sigma_min;
  const double gap = r.risk - c_opt;

  r.valid = true;
  double sum_full = 0.0;
  double sum_suffix = 0.0;
  for (std::size_t j = 0; j < inst.l; ++j) {
    const double s_suffix = spectral_extremes(suffix_product(inst.A, j)).sigma_min;
    const double s_prefix = spectral_extremes(prefix_product(inst.A, j)).sigma_min;
    const double raw = 1.0 - s_prefix * s_suffix;
    const double raw_suffix = 1.0 - s_suffix;
    if (raw >= gamma_limit) r.valid = false;
    const double g = std::clamp(raw, 0.0, gamma_limit);
    const double gs = std::clamp(raw_suffix, 0.0, gamma_limit);
    r.gamma.push_back(g);
    r.suffix_gamma.push_back(gs);
    sum_full += (1.0 - g) * (1.0 - g);
    sum_suffix += (1.0 - gs) * (1.0 - gs);
  }
  r.rhs = 4.0 * sum_full * r.sigma_min_sigma * gap;
  r.slack = r.lhs - r.rhs;
  r.suffix_rhs = 4.0 * sum_suffix * r.sigma_min_sigma * gap;
  r.suffix_slack = r.lhs - r.suffix_rhs;
  r.sqrt_sigma_rhs = 4.0 * sum_full * sqrt_sigma_min * gap;
  r.sqrt_sigma_slack = r.lhs - r.sqrt_sigma_rhs;
  return r;
}

NearIdentityBound near_identity_bound(const Matrix& R, std::size_t l) {
  require(R.rows() == R.cols() && !R.empty(), "near_identity_bound: R must be square");
  require(l >= 1, "near_identity_bound: l must be >= 1");
  const double det = determinant(R);
  if (!(det > 0.0)) {
    throw ContractViolation("near_identity_bound: det(R) = " + std::to_string(det) +
                            " violates the hypothesis det(R) > 0");
  }
  const auto e = spectral_extremes(R);
  NearIdentityBound out;
  out.gamma = std::max(std::abs(std::log(e.sigma_max)), std::abs(std::log(e.sigma_min)));
  out.bound = (4.0 * std::numbers::pi + 3.0 * out.gamma) / static_cast<double>(l);
  out.hypothesis_holds = static_cast<double>(l) / 3.0 >= out.gamma;
  return out;
}

Matrix random_orthogonal(Rng& rng, std::size_t d) {
  for (;;) {
    Matrix q = gaussian_matrix(rng, d, d, 1.0);
    bool ok = true;
    // Modified Gram-Schmidt on columns.
    for (std::size_t c = 0; c < d && ok; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += q(i, p) * q(i, c);
        for (std::size_t i = 0; i < d; ++i) q(i, c) -= proj * q(i, p);
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) norm += q(i, c) * q(i, c);
      norm = std::sqrt(norm);
      if (norm < 1e-8) ok = false;
      else
        for (std::size_t i = 0; i < d; ++i) q(i, c) /= norm;
    }
    if (ok) return q;
  }
}

LinearInstance sample_instance(Rng& rng, const InstanceOptions& o) {
  require(o.d >= 1 && o.l >= 1, "sample_instance: d and l must be >= 1");
  require(o.eigen_lo > 0.0 && o.eigen_hi >= o.eigen_lo, "sample_instance: invalid eigenvalue range");
  require(o.max_layer_norm >= 0.0, "sample_instance: max_layer_norm must be >= 0");
  LinearInstance inst;
  inst.d = o.d;
  inst.l = o.l;
  inst.noise_constant = static_cast<double>(o.d);

  const Matrix q = random_orthogonal(rng, o.d);
  Matrix lambda(o.d, o.d);
  const double lo = std::log(o.eigen_lo);
  const double hi = std::log(o.eigen_hi);
  for (std::size_t i = 0; i < o.d; ++i) lambda(i, i) = std::exp(lo + (hi - lo) * rng.uniform());
  Matrix sigma = gemm_nt(gemm(q, lambda), q);
  inst.Sigma = 0.5 * (sigma + transpose(sigma));

  const Matrix s = gaussian_matrix(rng, o.d, o.d, o.log_r_scale / std::sqrt(static_cast<double>(o.d)));
  inst.R = matrix_exp(s);

  for (std::size_t k = 0; k < o.l; ++k) {
    Matrix a = gaussian_matrix(rng, o.d, o.d, 1.0);
    const double target = o.max_layer_norm * (1.0 - rng.uniform());
    const double norm = spectral_extremes(a).sigma_max;
    if (norm > 0.0) a *= target / norm;
    inst.A.push_back(std::move(a));
  }
  return inst;
}

MonteCarloRisk monte_carlo_risk(const LinearInstance& inst, std::size_t samples, Rng& rng) {
  require(samples >= 2, "monte_carlo_risk: need at least 2 samples");
  const RiskParts parts = risk_parts(inst);
  const Matrix map = gemm(parts.error, parts.sqrt_sigma);  // y_hat - y = map z - xi
  const std::size_t d = inst.d;
  std::vector<double> z(d);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : z) v = rng.gaussian();
    double loss = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double r = -rng.gaussian();
      for (std::size_t k = 0; k < d; ++k) r += map(i, k) * z[k];
      loss += r * r;
    }
    sum += loss;
    sum_sq += loss * loss;
  }
  const double n = static_cast<double>(samples);
  MonteCarloRisk out;
  out.samples = samples;
  out.mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * out.mean * out.mean) / (n - 1.0));
  out.standard_error = std::sqrt(var / n);
  return out;
}

DescentResult gradient_descent(const LinearInstance& start, const DescentOptions& o) {
  LinearInstance inst = start;
  double f = excess_risk(inst);
  double step = o.initial_step;
  DescentResult out;
  for (std::size_t it = 0;; ++it) {
    const auto g = risk_gradient(inst);
    double gn2 = 0.0;
    for (const auto& m : g) gn2 += dot(m, m);
    out.gradient_norm = std::sqrt(gn2);
    out.iterations = it;
    if (out.gradient_norm < o.gradient_tol) {
      out.converged = true;
      break;
    }
    if (it >= o.max_iterations) break;
    step = std::min(step * 2.0, 1e3);
    bool accepted = false;
    while (step >= 1e-20) {
      LinearInstance trial = inst;
      for (std::size_t j = 0; j < trial.l; ++j) trial.A[j] -= step * g[j];
      const double ft = excess_risk(trial);
      if (ft <= f - 1e-4 * step * gn2) {
        inst = std::move(trial);
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  out.A = inst.A;
  out.excess_risk = f;
  out.risk = f + inst.noise_constant;
  return out;
}

nlohmann::json instance_to_json(const LinearInstance& inst) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& m : inst.A) a.push_back(network::matrix_to_json(m));
  return {{"d", inst.d},
          {"l", inst.l},
          {"R", network::matrix_to_json(inst.R)},
          {"Sigma", network::matrix_to_json(inst.Sigma)},
          {"A", a},
          {"noise_constant", inst.noise_constant}};
}

LinearInstance instance_from_json(const nlohmann::json& j) {
  LinearInstance inst;
  inst.d = j.at("d").get<std::size_t>();
  inst.l = j.at("l").get<std::size_t>();
  inst.R = network::matrix_from_json(j.at("R"));
  inst.Sigma = network::matrix_from_json(j.at("Sigma"));
  for (const auto& m : j.at("A")) inst.A.push_back(network::matrix_from_json(m));
  inst.noise_constant = j.at("noise_constant").get<double>();
  inst.validate();
  return inst;
}

}  // namespace sml::landscape
