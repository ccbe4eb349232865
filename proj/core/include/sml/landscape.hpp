#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sml/matrix.hpp"
#include "sml/rng.hpp"

namespace sml::landscape {

/// Linear nested skip network y_hat = (I + A_1(I + A_2(... (I + A_l)))) x
/// fitted to y = R x + xi with E[x x^T] = Sigma and E||xi||^2 = noise_constant.
struct LinearInstance {
  std::size_t d = 0;
  std::size_t l = 0;
  Matrix R;
  Matrix Sigma;
  std::vector<Matrix> A;
  double noise_constant = 0.0;  // d for unit spherical noise

  void validate() const;
};

/// I + A_1(I + A_2(... (I + A_l))), evaluated innermost-out. A must be non-empty.
Matrix nested_product(std::span<const Matrix> A);

/// Prefix A_1 ... A_{j-1} (identity for j = 0) and suffix I + A_{j+1}(...(I + A_l))
/// (identity for the last layer), 0-based j. The nested product is
/// affine in A_j: N = (terms without A_j) + prefix_j A_j suffix_j.
Matrix prefix_product(std::span<const Matrix> A, std::size_t j);
Matrix suffix_product(std::span<const Matrix> A, std::size_t j);

/// ||(N - R) Sigma^{1/2}||_F^2 + noise_constant.
double population_risk(const LinearInstance& inst);
/// population_risk minus noise_constant, computed without the cancellation.
double excess_risk(const LinearInstance& inst);

/// df/dA_j = 2 prefix_j^T (N - R) Sigma suffix_j^T for every layer.
std::vector<Matrix> risk_gradient(const LinearInstance& inst);

struct GradientBoundReport {
  double lhs = 0.0;              // ||grad f||_F^2 over all layers
  std::vector<double> gamma;     // 1 - sigma_min(prefix_i) sigma_min(suffix_i), clamped to [0, 1)
  double rhs = 0.0;              // 4 sum (1 - gamma_i)^2 sigma_min(Sigma) (f - C_opt)
  double slack = 0.0;
  bool valid = false;            // every unclamped gamma_i < 1
  double risk = 0.0;
  double c_opt = 0.0;
  double sigma_min_sigma = 0.0;

  // Suffix-only gamma_i = 1 - sigma_min(suffix_i): same chain without the prefix factor.
  std::vector<double> suffix_gamma;
  double suffix_rhs = 0.0;
  double suffix_slack = 0.0;
  // Using sigma_min(Sigma^{1/2}) in place of sigma_min(Sigma).
  double sqrt_sigma_rhs = 0.0;
  double sqrt_sigma_slack = 0.0;
};

/// Gradient lower bound check; callers compare slack with -tol (1 + lhs).
/// `gamma_limit` marks gamma_i >= gamma_limit as invalid (near-singular factor).
GradientBoundReport gradient_bound_check(const LinearInstance& inst, double c_opt, double gamma_limit = 1.0 - 1e-9);

struct NearIdentityBound {
  double gamma = 0.0;  // max(|ln sigma_max(R)|, |ln sigma_min(R)|)
  double bound = 0.0;  // (4 pi + 3 gamma) / l
  bool hypothesis_holds = false;  // l / 3 >= gamma
};

/// Throws ContractViolation when det(R) <= 0 or l == 0.
NearIdentityBound near_identity_bound(const Matrix& R, std::size_t l);

struct SpectralExtremes {
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  std::size_t sweeps = 0;
};

inline constexpr double kSvdTolerance = 1e-10;

/// Largest and smallest singular values by one-sided (Hestenes) Jacobi.
/// A sweep rotates every column pair whose cosine exceeds tol; convergence
/// is a sweep without rotations. Throws NumericalError after max_sweeps.
SpectralExtremes spectral_extremes(const Matrix& m, double tol = kSvdTolerance, std::size_t max_sweeps = 60);
std::vector<double> singular_values(const Matrix& m, double tol = kSvdTolerance, std::size_t max_sweeps = 60);

struct InstanceOptions {
  std::size_t d = 3;
  std::size_t l = 2;
  double max_layer_norm = 0.3;  // each ||A_i|| uniform in (0, max_layer_norm]
  double eigen_lo = 0.1;        // Sigma eigenvalues log-uniform in [eigen_lo, eigen_hi]
  double eigen_hi = 10.0;
  double log_r_scale = 0.5;     // R = exp(S), S_ij ~ N(0, log_r_scale^2 / d)
};

/// Sigma = Q diag(lambda) Q^T with Haar-like Q (Gram-Schmidt on a Gaussian
/// matrix) and R = exp(S), so det(R) = exp(tr S) > 0.
LinearInstance sample_instance(Rng& rng, const InstanceOptions& options);
Matrix random_orthogonal(Rng& rng, std::size_t d);

struct MonteCarloRisk {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Mean of ||y_hat - y||^2 with x = Sigma^{1/2} z, xi ~ N(0, I); matches
/// population_risk when noise_constant = d.
MonteCarloRisk monte_carlo_risk(const LinearInstance& inst, std::size_t samples, Rng& rng);

struct DescentOptions {
  double gradient_tol = 1e-9;
  std::size_t max_iterations = 200000;
  double initial_step = 0.1;
};

struct DescentResult {
  std::vector<Matrix> A;
  double risk = 0.0;
  double excess_risk = 0.0;  // risk - noise_constant, accurate near the optimum
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Gradient descent with Armijo backtracking from inst.A. The sufficient
/// decrease test is applied to the excess risk so it stays meaningful below
/// the rounding level of noise_constant.
DescentResult gradient_descent(const LinearInstance& inst, const DescentOptions& options = {});

nlohmann::json instance_to_json(const LinearInstance& inst);
LinearInstance instance_from_json(const nlohmann::json& j);

}  // namespace sml::landscape
