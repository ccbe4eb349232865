#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "sml/errors.hpp"
#include "sml/landscape.hpp"
#include "sml/linalg.hpp"

namespace sml::landscape {
namespace {

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

double frob2(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

LinearInstance random_instance(std::uint64_t seed, std::size_t d, std::size_t l) {
  Rng rng(seed);
  InstanceOptions o;
  o.d = d;
  o.l = l;
  return sample_instance(rng, o);
}

TEST(Nested, SmallCases) {
  const std::vector<Matrix> zeros(3, Matrix(2, 2));
  EXPECT_EQ(nested_product(zeros), Matrix::identity(2));
  Rng rng(1);
  const std::vector<Matrix> one{gaussian_matrix(rng, 3, 3, 1.0)};
  EXPECT_EQ(nested_product(one), Matrix::identity(3) + one[0]);
  const std::vector<Matrix> two{gaussian_matrix(rng, 3, 3, 1.0), gaussian_matrix(rng, 3, 3, 1.0)};
  EXPECT_LT(max_abs_diff(nested_product(two), Matrix::identity(3) + two[0] + gemm(two[0], two[1])), 1e-14);
  EXPECT_THROW(nested_product(std::vector<Matrix>{}), ContractViolation);
}

TEST(Nested, MatchesExpandedSum) {
  // I + A1 + A1A2 + A1A2A3 + ... summed as prefix products.
  Rng rng(2);
  std::vector<Matrix> A;
  for (int i = 0; i < 4; ++i) A.push_back(gaussian_matrix(rng, 4, 4, 0.5));
  Matrix expanded = Matrix::identity(4), prefix = Matrix::identity(4);
  for (const auto& a : A) {
    prefix = gemm(prefix, a);
    expanded += prefix;
  }
  EXPECT_LT(max_abs_diff(nested_product(A), expanded), 1e-13);
}

TEST(Nested, AffineInEachLayer) {
  Rng rng(3);
  std::vector<Matrix> A;
  for (int i = 0; i < 3; ++i) A.push_back(gaussian_matrix(rng, 3, 3, 0.5));
  for (std::size_t j = 0; j < 3; ++j) {
    auto A0 = A;
    A0[j] = Matrix(3, 3);
    const Matrix expect = nested_product(A0) + gemm(gemm(prefix_product(A, j), A[j]), suffix_product(A, j));
    EXPECT_LT(max_abs_diff(nested_product(A), expect), 1e-13) << j;
  }
}

TEST(Risk, Examples) {
  LinearInstance inst = random_instance(4, 3, 2);
  inst.noise_constant = 3.0;
  inst.A.assign(2, Matrix(3, 3));
  inst.R = Matrix::identity(3);
  EXPECT_EQ(population_risk(inst), 3.0);
  EXPECT_EQ(excess_risk(inst), 0.0);

  // l = 1 with A1 = R - I realizes R.
  LinearInstance exact = random_instance(5, 3, 1);
  exact.A[0] = exact.R - Matrix::identity(3);
  EXPECT_NEAR(population_risk(exact), exact.noise_constant, 1e-12);
  EXPECT_NEAR(excess_risk(exact), 0.0, 1e-24);
}

TEST(Risk, ClosedFormTrace) {
  // ||E Sigma^{1/2}||_F^2 = tr(E Sigma E^T).
  const auto inst = random_instance(6, 4, 3);
  const Matrix E = nested_product(inst.A) - inst.R;
  const Matrix M = gemm(gemm(E, inst.Sigma), transpose(E));
  double tr = 0.0;
  for (std::size_t i = 0; i < 4; ++i) tr += M(i, i);
  EXPECT_NEAR(excess_risk(inst), tr, 1e-12 * (1 + tr));
  EXPECT_NEAR(population_risk(inst), tr + inst.noise_constant, 1e-12 * (1 + tr));
}

TEST(Risk, MonteCarloAgrees) {
  const auto inst = random_instance(7, 3, 2);
  Rng rng(8);
  const auto mc = monte_carlo_risk(inst, 1'000'000, rng);
  EXPECT_EQ(mc.samples, 1'000'000u);
  EXPECT_NEAR(mc.mean, population_risk(inst), 3.0 * mc.standard_error);
}

TEST(Gradient, DepthOneClosedForm) {
  const auto inst = random_instance(9, 4, 1);
  const Matrix expect = 2.0 * gemm(Matrix::identity(4) + inst.A[0] - inst.R, inst.Sigma);
  EXPECT_LT(max_abs_diff(risk_gradient(inst)[0], expect), 1e-12);
}

TEST(Gradient, ZeroAtOptimum) {
  auto inst = random_instance(10, 3, 1);
  inst.A[0] = inst.R - Matrix::identity(3);
  for (const auto& g : risk_gradient(inst)) EXPECT_LT(std::sqrt(frob2(g)), 1e-10);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng pick(1000 + s);
    const std::size_t d = 1 + pick.uniform_below(5), l = 1 + pick.uniform_below(4);
    auto inst = random_instance(s, d, l);
    const auto g = risk_gradient(inst);
    double err = 0.0, norm = 0.0;
    for (std::size_t j = 0; j < l; ++j)
      for (std::size_t k = 0; k < d * d; ++k) {
        const double orig = inst.A[j].data()[k];
        inst.A[j].data()[k] = orig + h;
        const double fp = excess_risk(inst);
        inst.A[j].data()[k] = orig - h;
        const double fm = excess_risk(inst);
        inst.A[j].data()[k] = orig;
        const double fd = (fp - fm) / (2 * h);
        err += (fd - g[j].data()[k]) * (fd - g[j].data()[k]);
        norm += g[j].data()[k] * g[j].data()[k];
      }
    EXPECT_LT(std::sqrt(err) / std::max(std::sqrt(norm), 1e-12), 1e-6) << "seed " << s;
  }
}

TEST(Spectral, Examples) {
  const auto id = spectral_extremes(Matrix::identity(3));
  EXPECT_NEAR(id.sigma_max, 1.0, 1e-15);
  EXPECT_NEAR(id.sigma_min, 1.0, 1e-15);
  const auto dg = spectral_extremes(Matrix::from_rows({{3.0, 0.0}, {0.0, 0.5}}));
  EXPECT_NEAR(dg.sigma_max, 3.0, 1e-15);
  EXPECT_NEAR(dg.sigma_min, 0.5, 1e-15);
}

TEST(Spectral, MatchesEigen) {
  Rng rng(11);
  for (int c = 0; c < 50; ++c) {
    const std::size_t r = 1 + rng.uniform_below(6), k = 1 + rng.uniform_below(6);
    const Matrix m = gaussian_matrix(rng, r, k, 1.0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(m));
    const auto ref = svd.singularValues();
    auto ours = singular_values(m);
    std::sort(ours.begin(), ours.end(), std::greater<>());
    ASSERT_EQ(ours.size(), static_cast<std::size_t>(ref.size()));
    for (std::size_t i = 0; i < ours.size(); ++i) EXPECT_NEAR(ours[i], ref(i), 1e-8 * (1 + ref(0)));
    const auto ex = spectral_extremes(m);
    EXPECT_NEAR(ex.sigma_max, ref(0), 1e-8 * ref(0));
    EXPECT_NEAR(ex.sigma_min, ref(ref.size() - 1), 1e-8 * (1 + ref(0)));
  }
}

TEST(Spectral, MatchesEigenOfGram) {
  Rng rng(12);
  const Matrix m = gaussian_matrix(rng, 5, 5, 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(gemm_tn(m, m)));
  const auto ex = spectral_extremes(m);
  EXPECT_NEAR(ex.sigma_max, std::sqrt(es.eigenvalues()(4)), 1e-8 * ex.sigma_max);
  EXPECT_NEAR(ex.sigma_min, std::sqrt(es.eigenvalues()(0)), 1e-8 * ex.sigma_max);
}

TEST(NearIdentity, Examples) {
  for (std::size_t l : {1, 2, 7}) {
    const auto r = near_identity_bound(Matrix::identity(3), l);
    EXPECT_NEAR(r.gamma, 0.0, 1e-15);
    EXPECT_NEAR(r.bound, 4.0 * std::numbers::pi / static_cast<double>(l), 1e-14);
    EXPECT_TRUE(r.hypothesis_holds);
  }
  const auto two = near_identity_bound(2.0 * Matrix::identity(2), 3);
  EXPECT_NEAR(two.gamma, std::log(2.0), 1e-14);
  EXPECT_NEAR(two.bound, (4.0 * std::numbers::pi + 3.0 * std::log(2.0)) / 3.0, 1e-14);
  EXPECT_NEAR(two.bound, 4.881937, 1e-6);
  EXPECT_TRUE(two.hypothesis_holds);
  EXPECT_FALSE(near_identity_bound(Matrix::diagonal(std::vector<double>{100.0, 1.0}), 3).hypothesis_holds);
  EXPECT_THROW(near_identity_bound(Matrix::diagonal(std::vector<double>{-1.0, 1.0}), 2), ContractViolation);
  EXPECT_THROW(near_identity_bound(Matrix::identity(2), 0), ContractViolation);
}

TEST(GradientBound, OptimumHasZeroSides) {
  auto inst = random_instance(13, 3, 1);
  inst.A[0] = inst.R - Matrix::identity(3);
  const auto r = gradient_bound_check(inst, inst.noise_constant);
  EXPECT_NEAR(r.lhs, 0.0, 1e-20);
  EXPECT_NEAR(r.rhs, 0.0, 1e-20);
  EXPECT_TRUE(r.valid);
}

TEST(GradientBound, NearSingularSuffixIsInvalid) {
  auto inst = random_instance(14, 2, 2);
  // I + A_2 singular makes suffix_1 singular.
  inst.A[1] = Matrix::from_rows({{-1.0, 0.0}, {0.0, 0.0}});
  const auto r = gradient_bound_check(inst, inst.noise_constant);
  EXPECT_FALSE(r.valid);
}

TEST(GradientBound, RandomInstancesRespectBound) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng pick(s);
    const std::size_t d = 2 + pick.uniform_below(4), l = 1 + pick.uniform_below(4);
    const auto inst = random_instance(5000 + s, d, l);
    const auto r = gradient_bound_check(inst, inst.noise_constant);
    if (!r.valid) continue;
    EXPECT_GE(r.slack, -1e-8 * (1 + r.lhs)) << s;
    EXPECT_EQ(r.gamma.size(), l);
    // rhs recomputed from its parts.
    double sum = 0.0;
    for (double g : r.gamma) sum += (1 - g) * (1 - g);
    EXPECT_NEAR(r.rhs, 4 * sum * r.sigma_min_sigma * (r.risk - r.c_opt), 1e-9 * (1 + r.rhs));
  }
}

TEST(Descent, ConvergesToGlobalOptimum) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto inst = random_instance(700 + s, 3, 2);
    const auto r = gradient_descent(inst);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.gradient_norm, 1e-9);
    EXPECT_LT(r.excess_risk, 1e-6);
    LinearInstance at = inst;
    at.A = r.A;
    EXPECT_NEAR(excess_risk(at), r.excess_risk, 1e-15);
  }
}

TEST(Instance, SamplerRespectsOptions) {
  Rng rng(15);
  InstanceOptions o;
  o.d = 4;
  o.l = 3;
  const auto inst = sample_instance(rng, o);
  inst.validate();
  EXPECT_EQ(inst.A.size(), 3u);
  for (const auto& a : inst.A) EXPECT_LE(spectral_extremes(a).sigma_max, 0.3 + 1e-12);
  EXPECT_GT(determinant(inst.R), 0.0);
  const auto ev = symmetric_eigen(inst.Sigma).values;
  for (double v : ev) {
    EXPECT_GE(v, 0.1 - 1e-9);
    EXPECT_LE(v, 10.0 + 1e-9);
  }
  const Matrix q = random_orthogonal(rng, 5);
  EXPECT_LT(max_abs_diff(gemm_tn(q, q), Matrix::identity(5)), 1e-12);
}

TEST(Instance, JsonRoundTrip) {
  const auto inst = random_instance(16, 3, 2);
  const auto back = instance_from_json(instance_to_json(inst));
  EXPECT_EQ(back.R, inst.R);
  EXPECT_EQ(back.Sigma, inst.Sigma);
  EXPECT_EQ(back.A, inst.A);
  EXPECT_EQ(back.noise_constant, inst.noise_constant);
}

}  // namespace
}  // namespace sml::landscape
