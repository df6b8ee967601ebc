#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pgp_lqr/analytic.hpp"
#include "pgp_lqr/blackbox.hpp"
#include "pgp_lqr/checks.hpp"

using namespace pgp_lqr;

namespace {

SystemParams scalar_plant(double sigma = 1.0) {
  SystemParams s;
  s.A = Matrix::Constant(1, 1, -1.0);
  s.B = s.C = s.Q = s.R = Matrix::Identity(1, 1);
  s.init = InitialDistribution::custom([](CounterRng&) { return Vector::Ones(1); }, Matrix::Constant(1, 1, sigma), 1.0);
  return s;
}

SystemParams small_plant(std::uint64_t seed, Index n = 4, Index m = 2, Index p = 2) {
  CounterRng rng(seed);
  return random_dissipative_system(n, m, p, rng);
}

}  // namespace

TEST(Simulate, ScalarLongHorizonCost) {
  const SystemParams s = scalar_plant();
  const double cost = simulate_cost(s, Matrix::Zero(1, 1), Vector::Ones(1), 40.0).cost;
  EXPECT_NEAR(cost, 0.5, 1e-12);
  const oracle::Scalar sc;
  EXPECT_NEAR(simulate_cost(s, Matrix::Constant(1, 1, 0.3), Vector::Ones(1), 0.77).cost, sc.truncated_value(0.3, 0.77),
              1e-13);
}

TEST(Simulate, TruncationGapEqualsTerminalValue) {
  const SystemParams s = small_plant(11);
  const Matrix K = 0.2 * Matrix::Ones(2, 2);
  const Matrix X = value_matrix(s, K);
  CounterRng rng(3);
  for (double tau : {0.3, 1.0, 2.5}) {
    const Vector x0 = sample_initial(s.init, rng);
    const TrajectoryRecord rec = simulate_cost(s, K, x0, tau);
    const double gap = x0.dot(X * x0) - rec.cost;
    EXPECT_NEAR(gap, rec.final_state.dot(X * rec.final_state), 1e-10 * x0.dot(X * x0));
    EXPECT_LE(gap, norm2(X) * rec.final_state.squaredNorm() * (1 + 1e-10));
  }
}

TEST(Simulate, OutputsAndTailStep) {
  const SystemParams s = small_plant(12);
  const Matrix K = Matrix::Zero(2, 2);
  const Vector x0 = Vector::Ones(4);
  SimOptions opt;
  opt.dt = 0.1;
  const TrajectoryRecord rec = simulate_cost(s, K, x0, 0.35, opt);
  ASSERT_EQ(rec.times.size(), 5u);
  EXPECT_DOUBLE_EQ(rec.times.back(), 0.35);
  const Vector expected = s.C * oracle::taylor_expm(s.A * 0.35) * x0;
  EXPECT_LE((rec.outputs.col(4) - expected).norm(), 1e-12);
}

TEST(Simulate, DivergenceRaises) {
  SystemParams s = scalar_plant();
  SimOptions opt;
  opt.divergence_bound = 1e6;
  EXPECT_THROW(simulate_cost(s, Matrix::Constant(1, 1, -5.0), Vector::Ones(1), 100.0, opt), DivergenceError);
}

TEST(StackedObservation, EqualsReconstructionMatrixTimesState) {
  const SystemParams s = small_plant(13, 4, 1, 2);
  const Matrix K = Matrix::Constant(1, 2, 0.1);
  const DelayGrid grid = DelayGrid::uniform(5, 0.8);
  CounterRng rng(1);
  const Vector x0 = sample_initial(s.init, rng);
  Matrix F(2 * 5, 4);
  for (Index j = 0; j < 5; ++j) F.middleRows(2 * j, 2) = s.C * oracle::taylor_expm(closed_loop(s, K) * 0.2 * j);
  EXPECT_LE((stacked_observation(s, K, x0, 0.0, grid) - F * x0).norm(), 1e-10);
  EXPECT_LE((reconstruction_matrix(s, K, grid) - F).norm(), 1e-10);
}

TEST(DelayGrid, UniformAndValidation) {
  const DelayGrid g = DelayGrid::uniform(4, 0.3);
  EXPECT_EQ(g.count(), 4);
  EXPECT_DOUBLE_EQ(g.window(), 0.3);
  DelayGrid bad;
  bad.delays = {0.0, 0.2, 0.1};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.delays = {0.1, 0.2};
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(InitialDistribution, UniformCubeSecondMoment) {
  const InitialDistribution d = InitialDistribution::uniform_cube(3);
  CounterRng rng(5);
  Matrix S = Matrix::Zero(3, 3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const Vector x = sample_initial(d, rng);
    ASSERT_LE(x.cwiseAbs().maxCoeff(), 1.0);
    S += x * x.transpose();
  }
  EXPECT_LE((S / n - Matrix::Identity(3, 3) / 3.0).norm(), 0.02);
  EXPECT_LE((d.sigma - Matrix::Identity(3, 3) / 3.0).norm(), 1e-15);
}

TEST(Generator, PhlPlantsMeetAssumptions) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(seed);
    const SystemParams s = random_phl_system(10, 4, 2, rng);
    ASSERT_NO_THROW(validate(s)) << "seed " << seed;
    EXPECT_TRUE(is_hurwitz(s.A));
    EXPECT_LT(lambda_max_sym(symmetrize(s.A + s.A.transpose())), 0.0);
    EXPECT_EQ(observability_rank(s.A, s.C), 10);
  }
}

TEST(Generator, DeterministicPerSeed) {
  CounterRng a(77), b(77);
  const SystemParams s1 = random_phl_system(6, 2, 2, a);
  const SystemParams s2 = random_phl_system(6, 2, 2, b);
  EXPECT_EQ(s1.A, s2.A);
  EXPECT_EQ(s1.B, s2.B);
  EXPECT_EQ(s1.C, s2.C);
  EXPECT_THROW(random_phl_system(2, 4, 2, a), ConfigError);
}

TEST(Generator, CostInvariantUnderCoordinateChange) {
  // The emitted plant and its pre-transform version agree on f for any K.
  CounterRng rng(8);
  const SystemParams s = random_phl_system(5, 2, 2, rng);
  const Matrix T = s.init.transform;
  SystemParams orig = s;
  const Matrix Ti = T.inverse();
  orig.A = Ti * s.A * T;
  orig.B = Ti * s.B;
  orig.C = s.C * T;
  orig.init = InitialDistribution::uniform_cube(5);
  const Matrix K = Matrix::Zero(2, 2);
  EXPECT_NEAR(exact_cost(s, K), exact_cost(orig, K), 1e-9 * exact_cost(s, K));
}

TEST(Validate, NamesOffendingField) {
  SystemParams s = small_plant(3);
  s.Q = -Matrix::Identity(2, 2);
  try {
    validate(s);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Q"), std::string::npos);
  }
  SystemParams u = small_plant(3);
  u.C = Matrix::Zero(2, 4);
  u.C(0, 0) = 1.0;
  u.A = -Matrix::Identity(4, 4);
  EXPECT_THROW(validate(u), ConfigError);
}

TEST(RolloutOracle, MatchesSimulatorAndBellmanRecord) {
  const SystemParams s = small_plant(21, 3, 1, 1);
  const RolloutOracle box(s);
  const Matrix K = Matrix::Constant(1, 1, 0.1);
  const Vector x0 = Vector::Constant(3, 0.5);
  EXPECT_DOUBLE_EQ(box.rollout_cost(K, x0, 2.0), simulate_cost(s, K, x0, 2.0).cost);
  const DelayGrid grid = DelayGrid::uniform(4, 0.5);
  const BellmanSample rec = box.bellman_rollout(K, x0, 1.0, grid);
  const Matrix AK = closed_loop(s, K);
  const Matrix G = oracle::simpson_gramian(AK, closed_loop_weight(s, K), 1.0, 2000);
  EXPECT_NEAR(rec.cost, x0.dot(G * x0), 1e-9);
  const Vector x1 = oracle::taylor_expm(AK) * x0;
  EXPECT_LE((rec.y_later - stacked_observation(s, K, x1, 0.0, grid)).norm(), 1e-12);
}
