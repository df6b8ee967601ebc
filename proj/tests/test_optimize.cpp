#include <cmath>

#include <gtest/gtest.h>

#include "pgp_lqr/checks.hpp"
#include "pgp_lqr/optimize.hpp"

using namespace pgp_lqr;

namespace {

SystemParams scalar_plant() {
  SystemParams s;
  s.A = Matrix::Constant(1, 1, -1.0);
  s.B = s.C = s.Q = s.R = Matrix::Identity(1, 1);
  s.init = InitialDistribution::custom(nullptr, Matrix::Identity(1, 1), 1.0);
  return s;
}

}  // namespace

TEST(Pgp, ScalarConvergesToMinimizer) {
  const SystemParams s = scalar_plant();
  OptimizerConfig cfg;
  cfg.alpha = 0.5;
  cfg.epsilon = 1e-8;
  cfg.max_iterations = 10000;
  const RunLog log = pgp_run(exact_gradient_oracle(s), Matrix::Zero(1, 1), ConstraintSet::full(), cfg, &s);
  EXPECT_EQ(log.termination, Termination::StepNorm);
  EXPECT_NEAR(log.result(0, 0), std::sqrt(2.0) - 1.0, 1e-6);
  EXPECT_LE(exact_gradient(s, log.result).norm(), 1e-6);
  EXPECT_LE(check_stationarity(s, log.result, cfg.alpha, ConstraintSet::full(), 1e-6).mapping_norm, 1e-6);
}

TEST(Pgp, StrictDescentWithTheoryStep) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CounterRng rng(seed);
    const SystemParams s = random_dissipative_system(4, 2, 2, rng);
    const Matrix K0 = Matrix::Zero(2, 2);
    const SublevelConstants c = constants(s, K0, exact_cost(s, K0));
    OptimizerConfig cfg;
    cfg.lambda = 0.0;
    cfg.alpha = recommended_step(c, 0.0);
    cfg.epsilon = 1e-14;
    cfg.max_iterations = 200;
    const RunLog log = pgp_run(exact_gradient_oracle(s), K0, ConstraintSet::full(), cfg, &s);
    for (std::size_t i = 1; i < log.records.size(); ++i) {
      EXPECT_LT(log.records[i].true_cost, log.records[i - 1].true_cost) << "seed " << seed << " step " << i;
    }
  }
}

TEST(Pgp, PatternIsMetExactlyWithZerothOrderOracle) {
  const SystemParams s = checks::reference_system(3);
  const RolloutOracle box(s);
  const ConstraintSet omega = ConstraintSet::pattern(checks::reference_mask());
  OptimizerConfig cfg;
  cfg.max_iterations = 20;
  const RunLog log = pgp_run(bellman_baseline_oracle(box, EstimatorConfig{2, 1e-3, 100.0}, DelayGrid::uniform(20, 0.1),
                                                     BellmanConfig{}, 5),
                             Matrix::Zero(4, 2), omega, cfg, &s);
  ASSERT_EQ(log.records.size(), 20u) << log.message;
  for (const auto& rec : log.records) {
    EXPECT_TRUE(omega.contains(rec.K));
    EXPECT_TRUE(rec.hurwitz.value_or(false));
  }
  // Per iteration: 2 perturbed, 2 auxiliary and 55 Bellman rollouts.
  EXPECT_EQ(log.records.back().samples_cumulative, 20 * 59);
}

TEST(Pgp, DeterministicForSeed) {
  const SystemParams s = checks::reference_system(3);
  const RolloutOracle box(s);
  OptimizerConfig cfg;
  cfg.max_iterations = 5;
  const auto run = [&] {
    return pgp_run(zeroth_order_oracle(box, EstimatorConfig{2, 1e-3, 50.0}, 8), Matrix::Zero(4, 2),
                   ConstraintSet::full(), cfg, &s);
  };
  EXPECT_EQ(run().result, run().result);
}

TEST(Pgp, UnstableStepStopsOrHalves) {
  const SystemParams s = scalar_plant();
  // Constant gradient -1 from a fake oracle pushes k down towards -1.
  const GradientOracle push = [](const Matrix&, long) { return GradientQuery{Matrix::Constant(1, 1, 1.0), 0, 0}; };
  OptimizerConfig cfg;
  cfg.alpha = 0.6;
  cfg.max_iterations = 10;
  RunLog log = pgp_run(push, Matrix::Zero(1, 1), ConstraintSet::full(), cfg, &s);
  EXPECT_EQ(log.termination, Termination::Unstable);
  EXPECT_EQ(log.records.size(), 2u);
  cfg.persist = true;
  log = pgp_run(push, Matrix::Zero(1, 1), ConstraintSet::full(), cfg, &s);
  EXPECT_DOUBLE_EQ(log.final_alpha, 0.3);
  EXPECT_EQ(log.termination, Termination::Unstable);
}

TEST(Pgp, RejectsInfeasibleOrUnstableStart) {
  const SystemParams s = scalar_plant();
  OptimizerConfig cfg;
  EXPECT_THROW(pgp_run(exact_gradient_oracle(s), Matrix::Constant(1, 1, -0.5), ConstraintSet::psd(), cfg, &s),
               ConfigError);
  EXPECT_THROW(pgp_run(exact_gradient_oracle(s), Matrix::Constant(1, 1, -2.0), ConstraintSet::full(), cfg, &s),
               StabilityError);
  cfg.lambda = 1.0;
  EXPECT_THROW(pgp_run(exact_gradient_oracle(s), Matrix::Zero(1, 1), ConstraintSet::full(), cfg, &s), ConfigError);
}

TEST(Pgp, OracleFailureIsReported) {
  const GradientOracle failing = [](const Matrix&, long) -> GradientQuery { throw EstimationError("no data"); };
  OptimizerConfig cfg;
  const RunLog log = pgp_run(failing, Matrix::Zero(1, 1), ConstraintSet::full(), cfg);
  EXPECT_EQ(log.termination, Termination::OracleFailure);
  EXPECT_EQ(log.message, "no data");
}

TEST(Schedules, StepAndIterationBound) {
  SublevelConstants c;
  c.L = 4.0;
  EXPECT_DOUBLE_EQ(recommended_step(c, 0.0), 0.45);
  EXPECT_DOUBLE_EQ(recommended_step(c, 0.5), 0.225);
  // f0 / (eps^2 alpha^2 (1/alpha - L/2)) = 1 / (0.01 * 0.25 * (2 - 2)) is invalid
  EXPECT_THROW(min_iterations(1.0, 0.1, 0.5, 0.0, 4.0), ConfigError);
  // alpha = 0.2: 1 / (0.01 * 0.04 * 3) = 833.3 -> 834
  EXPECT_EQ(min_iterations(1.0, 0.1, 0.2, 0.0, 4.0), 834);
}

TEST(Trend, ThirdMedians) {
  std::vector<double> costs(300);
  for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = 300.0 - static_cast<double>(i);
  const auto m = checks::third_medians(costs);
  ASSERT_EQ(m.size(), 4u);
  EXPECT_TRUE(checks::strictly_decreasing(m));
  EXPECT_TRUE(checks::third_medians(std::vector<double>(100, 1.0)).empty());
}
