#pragma once

#include <functional>

#include "sml/matrix.hpp"

namespace sml {

using ScalarFunction = std::function<double(const Matrix&)>;

/// Central-difference gradient (f(x + h e_i) - f(x - h e_i)) / 2h for every entry.
/// Throws NumericalError naming the entry when an evaluation is non-finite.
Matrix finite_diff_grad(const ScalarFunction& f, const Matrix& x, double h);

/// max_i |a_i - b_i| / max(floor, max(|a_i|, |b_i|)).
double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-8);

}  // namespace sml
