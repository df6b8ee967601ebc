#include <gtest/gtest.h>

#include "pgp_lqr/checks.hpp"
#include "pgp_lqr/constraint.hpp"

using namespace pgp_lqr;

TEST(Pattern, ReferenceMaskZeroesMarkedEntries) {
  Matrix St(2, 4);
  St << 1, 1, 0, 0, 0, 0, 1, 1;
  const ConstraintSet omega = ConstraintSet::pattern(St.transpose());
  const Matrix P = omega.project(Matrix::Ones(4, 2));
  Matrix expected(4, 2);
  expected << 0, 1, 0, 1, 1, 0, 1, 0;
  EXPECT_EQ(P, expected);
  EXPECT_TRUE(omega.contains(P));
  EXPECT_FALSE(omega.contains(Matrix::Ones(4, 2)));
  EXPECT_EQ(checks::reference_mask(), St.transpose());
}

TEST(Pattern, RejectsNonBinaryMaskAndShapeMismatch) {
  Matrix bad(1, 2);
  bad << 1, 0.5;
  EXPECT_THROW(ConstraintSet::pattern(bad), ConfigError);
  const ConstraintSet omega = ConstraintSet::pattern(Matrix::Zero(2, 2));
  EXPECT_THROW(omega.project(Matrix::Zero(3, 2)), DimensionError);
}

TEST(Psd, ClipsNegativeEigenvalues) {
  Matrix Y(2, 2);
  Y << 1.0, 0.0, 0.0, -2.0;
  const Matrix P = ConstraintSet::psd().project(Y);
  EXPECT_NEAR(P(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(P(1, 1), 0.0, 1e-15);
  EXPECT_TRUE(ConstraintSet::psd().contains(P));
  EXPECT_THROW(ConstraintSet::psd().project(Matrix::Zero(2, 3)), DimensionError);
}

TEST(Psd, FeasibleInputIsReturnedUnchanged) {
  CounterRng rng(2);
  const Matrix G = checks::normal_matrix(3, 3, rng);
  const Matrix K = symmetrize(G * G.transpose());
  EXPECT_EQ(ConstraintSet::psd().project(K), K);
}

TEST(Projection, Axioms) {
  const checks::CheckResult r = checks::projection_axioms(5, 2000);
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Full, IsIdentity) {
  CounterRng rng(3);
  const Matrix Y = checks::normal_matrix(3, 2, rng);
  EXPECT_EQ(ConstraintSet::full().project(Y), Y);
  EXPECT_EQ(ConstraintSet::full().name(), "full");
}
