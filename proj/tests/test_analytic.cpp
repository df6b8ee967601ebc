#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pgp_lqr/analytic.hpp"
#include "pgp_lqr/checks.hpp"

using namespace pgp_lqr;

namespace {

SystemParams scalar_plant() {
  SystemParams s;
  s.A = Matrix::Constant(1, 1, -1.0);
  s.B = s.C = s.Q = s.R = Matrix::Identity(1, 1);
  s.init = InitialDistribution::custom(nullptr, Matrix::Identity(1, 1), 1.0);
  return s;
}

Matrix k1(double k) { return Matrix::Constant(1, 1, k); }

}  // namespace

TEST(ExactCost, ScalarClosedForms) {
  const SystemParams s = scalar_plant();
  EXPECT_NEAR(exact_cost(s, k1(0.0)), 0.5, 1e-15);
  EXPECT_NEAR(exact_cost(s, k1(1.0)), 0.5, 1e-15);
  EXPECT_NEAR(exact_value(s, k1(0.0), Vector::Ones(1)), 0.5, 1e-15);
  const oracle::Scalar sc;
  for (double k : {-0.5, 0.2, 2.0}) EXPECT_NEAR(exact_cost(s, k1(k)), sc.cost(k), 1e-14);
  EXPECT_THROW(exact_cost(s, k1(-1.5)), StabilityError);
}

TEST(ExactGradient, ScalarClosedForms) {
  const SystemParams s = scalar_plant();
  EXPECT_NEAR(exact_gradient(s, k1(0.0))(0, 0), -0.5, 1e-14);
  EXPECT_NEAR(exact_gradient(s, k1(std::sqrt(2.0) - 1.0))(0, 0), 0.0, 1e-8);
  const oracle::Scalar sc;
  EXPECT_NEAR(exact_gradient(s, k1(0.7))(0, 0), sc.gradient(0.7), 1e-14);
}

TEST(ExactGradient, MatchesFiniteDifferences) {
  CounterRng rng(31);
  const SystemParams s = random_dissipative_system(4, 2, 3, rng);
  const Matrix K = 0.2 * checks::normal_matrix(2, 3, rng);
  const Matrix fd = oracle::central_difference([&](const Matrix& G) { return exact_cost(s, G); }, K, 1e-5);
  const Matrix g = exact_gradient(s, K);
  EXPECT_LE((g - fd).norm() / g.norm(), 1e-5);
}

TEST(ExactCost, MonteCarloAgreesWithTrace) {
  CounterRng rng(32);
  const SystemParams s = random_dissipative_system(4, 2, 2, rng);
  const Matrix K = Matrix::Zero(2, 2);
  const Matrix X = value_matrix(s, K);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector x0 = sample_initial(s.init, rng);
    acc += x0.dot(X * x0);
  }
  EXPECT_NEAR(acc / n, exact_cost(s, K), 0.01 * exact_cost(s, K));
}

TEST(TruncatedCost, ApproachesExactCost) {
  const SystemParams s = scalar_plant();
  const oracle::Scalar sc;
  EXPECT_NEAR(truncated_cost(s, k1(0.4), 0.9), sc.truncated_value(0.4, 0.9), 1e-14);
  EXPECT_NEAR(truncated_cost(s, k1(0.4), 60.0), exact_cost(s, k1(0.4)), 1e-14);
}

TEST(YPrime, MatchesDirectionalDerivativeOfY) {
  CounterRng rng(33);
  const SystemParams s = random_dissipative_system(4, 2, 2, rng);
  const Matrix K = 0.1 * Matrix::Ones(2, 2);
  Matrix E = checks::normal_matrix(2, 2, rng);
  E /= E.norm();
  const double h = 1e-6;
  const Matrix fd = (lyapunov_pair(s, K + h * E).Y - lyapunov_pair(s, K - h * E).Y) / (2.0 * h);
  const Matrix yp = y_prime(s, K, E);
  EXPECT_LE((yp - fd).norm() / yp.norm(), 1e-6);
}

TEST(GradientMapping, VanishesAtUnconstrainedMinimizer) {
  const SystemParams s = scalar_plant();
  EXPECT_LE(gradient_mapping(s, k1(std::sqrt(2.0) - 1.0), 0.1, ConstraintSet::full()).norm(), 1e-8);
  // At k = 0 with k >= 0 and a negative gradient the mapping pushes inward.
  EXPECT_NEAR(gradient_mapping(s, k1(0.0), 0.1, ConstraintSet::psd())(0, 0), 0.5, 1e-14);
  EXPECT_THROW(gradient_mapping(s, k1(0.0), 0.0, ConstraintSet::full()), ConfigError);
}

TEST(Constants, ScalarHandEvaluation) {
  const SublevelConstants c = constants(scalar_plant(), k1(0.0), 1.0);
  EXPECT_NEAR(c.sigma, 1.0, 1e-15);
  EXPECT_NEAR(c.kappa, 3.0, 1e-15);
  EXPECT_NEAR(c.xi, 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(c.x_bound, 1.0, 1e-15);
  EXPECT_NEAR(c.y_bound, 144.0, 1e-12);
  EXPECT_NEAR(c.a_bound, 4.0, 1e-15);
  EXPECT_NEAR(c.beta, 8.0, 1e-15);
  // At 2a: kappa = 5, xi = 1/20, Y bound = 2 / (1/400) = 800.
  EXPECT_NEAR(c.eta, 1.0 / 800.0, 1e-15);
}

TEST(Constants, RejectsBadInputs) {
  EXPECT_THROW(constants(scalar_plant(), k1(0.0), 0.4), ConfigError);
  // Hurwitz but A + A^T is indefinite.
  SystemParams s;
  s.A.resize(2, 2);
  s.A << -1.0, 10.0, 0.0, -1.0;
  s.B = s.C = Matrix::Identity(2, 2);
  s.Q = s.R = Matrix::Identity(2, 2);
  s.init = InitialDistribution::uniform_cube(2);
  EXPECT_THROW(constants(s, Matrix::Zero(2, 2), 1e3), ConfigError);
}

TEST(Constants, BoundsHoldOnSampledGains) {
  CounterRng rng(34);
  const SystemParams s = random_phl_system(6, 2, 2, rng);
  const Matrix K0 = Matrix::Zero(2, 2);
  const double a = 2.0 * exact_cost(s, K0);
  const SublevelConstants c = constants(s, K0, a);
  for (int k = 0; k < 100; ++k) {
    const Matrix K = checks::sample_sublevel(s, K0, a, rng);
    const LyapunovPair ly = lyapunov_pair(s, K);
    EXPECT_LE(norm2(ly.X), c.x_bound);
    EXPECT_LE(norm2(ly.Y), c.y_bound);
    EXPECT_LE(norm2(K), c.kappa);
  }
}

TEST(StackedValueMatrix, ReproducesValueOnReachableVectors) {
  CounterRng rng(35);
  const SystemParams s = random_dissipative_system(3, 1, 1, rng);
  const Matrix K = Matrix::Zero(1, 1);
  const DelayGrid grid = DelayGrid::uniform(4, 1.0);
  const Matrix P = stacked_value_matrix(s, K, grid);
  for (int i = 0; i < 10; ++i) {
    const Vector x0 = sample_initial(s.init, rng);
    const Vector y = stacked_observation(s, K, x0, 0.0, grid);
    EXPECT_NEAR(y.dot(P * y), exact_value(s, K, x0), 1e-8 * exact_value(s, K, x0));
  }
}
