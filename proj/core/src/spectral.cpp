#include <algorithm>
#include <cmath>

#include "sml/errors.hpp"
#include "sml/landscape.hpp"

namespace sml::landscape {

namespace {

std::vector<double> hestenes(const Matrix& input, double tol, std::size_t max_sweeps, std::size_t& sweeps_out) {
  require(!input.empty(), "singular_values: empty matrix");
  require(input.all_finite(), "singular_values: non-finite entries");
  // Work on the tall orientation so the column count is the number of singular values.
  Matrix u = input.rows() >= input.cols() ? input : transpose(input);
  const std::size_t m = u.rows();
  const std::size_t n = u.cols();
  std::size_t sweep = 0;
  for (;;) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u(i, p) * u(i, p);
          beta += u(i, q) * u(i, q);
          gamma += u(i, p) * u(i, q);
        }
        if (gamma == 0.0 || std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u(i, p);
          const double uq = u(i, q);
          u(i, p) = c * up - s * uq;
          u(i, q) = s * up + c * uq;
        }
      }
    }
    ++sweep;
    if (!rotated) break;
    if (sweep >= max_sweeps) {
      throw NumericalError("singular_values: one-sided Jacobi did not converge after " + std::to_string(sweep) +
                           " sweeps");
    }
  }
  std::vector<double> sv(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u(i, k) * u(i, k);
    sv[k] = std::sqrt(s);
  }
  std::sort(sv.begin(), sv.end(), std::greater<>());
  sweeps_out = sweep;
  return sv;
}

}  // namespace

std::vector<double> singular_values(const Matrix& m, double tol, std::size_t max_sweeps) {
  std::size_t sweeps = 0;
  return hestenes(m, tol, max_sweeps, sweeps);
}

SpectralExtremes spectral_extremes(const Matrix& m, double tol, std::size_t max_sweeps) {
  SpectralExtremes e;
  const auto sv = hestenes(m, tol, max_sweeps, e.sweeps);
  e.sigma_max = sv.front();
  e.sigma_min = sv.back();
  return e;
}

}  // namespace sml::landscape
