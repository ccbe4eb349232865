#pragma once

#include <cstddef>
#include <vector>

#include "sml/matrix.hpp"

namespace sml {

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column i is the eigenvector of values[i]
  std::size_t sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Converges when the off-diagonal Frobenius norm falls below tol * ||m||_F.
/// Throws NumericalError after max_sweeps.
SymmetricEigen symmetric_eigen(const Matrix& m, double tol = 1e-14, std::size_t max_sweeps = 100);

/// Unique symmetric positive semidefinite B with B * B = m. m must be SPD (ContractViolation).
Matrix symmetric_sqrt(const Matrix& m);

/// exp(m) by scaling and squaring with a degree-18 Taylor core.
Matrix matrix_exp(const Matrix& m);

/// Determinant by LU with partial pivoting.
double determinant(const Matrix& m);

bool is_symmetric(const Matrix& m, double tol = 1e-12);

}  // namespace sml
