#include "sml/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sml/errors.hpp"

namespace sml {

Matrix finite_diff_grad(const ScalarFunction& f, const Matrix& x, double h) {
  require(h > 0.0, "finite_diff_grad: h must be > 0");
  Matrix grad(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double original = x(r, c);
      probe(r, c) = original + h;
      const double up = f(probe);
      probe(r, c) = original - h;
      const double down = f(probe);
      probe(r, c) = original;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("finite_diff_grad: non-finite evaluation at entry (" +
                             std::to_string(r) + ", " + std::to_string(c) + ")");
      }
      grad(r, c) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

double max_relative_error(const Matrix& a, const Matrix& b, double floor) {
  require(a.same_shape(b), "max_relative_error: shape mismatch");
  double worst = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double scale = std::max({floor, std::abs(ad[i]), std::abs(bd[i])});
    worst = std::max(worst, std::abs(ad[i] - bd[i]) / scale);
  }
  return worst;
}

}  // namespace sml
