#pragma once

// Closed convex gain sets with their Frobenius-orthogonal projections.

#include <string>
#include <utility>

#include "pgp_lqr/matlin.hpp"

namespace pgp_lqr {

class ConstraintSet {
 public:
  enum class Kind { Full, Pattern, Psd };

  static ConstraintSet full() { return ConstraintSet(Kind::Full, Matrix()); }

  /// {K : K o S = 0}; mask entries equal to 1 mark entries forced to zero.
  static ConstraintSet pattern(Matrix mask) {
    for (Index i = 0; i < mask.size(); ++i) {
      const double v = mask.data()[i];
      if (v != 0.0 && v != 1.0) throw ConfigError("pattern mask entries must be 0 or 1");
    }
    return ConstraintSet(Kind::Pattern, std::move(mask));
  }

  /// Symmetric positive semidefinite gains (square only).
  static ConstraintSet psd() { return ConstraintSet(Kind::Psd, Matrix()); }

  Kind kind() const { return kind_; }
  const Matrix& mask() const { return mask_; }

  std::string name() const {
    switch (kind_) {
      case Kind::Full: return "full";
      case Kind::Pattern: return "pattern";
      case Kind::Psd: return "psd";
    }
    return "unknown";
  }

  Matrix project(const Matrix& Y) const {
    switch (kind_) {
      case Kind::Full: return Y;
      case Kind::Pattern: {
        check_mask_shape(Y);
        Matrix out = Y;
        for (Index j = 0; j < Y.cols(); ++j)
          for (Index i = 0; i < Y.rows(); ++i)
            if (mask_(i, j) != 0.0) out(i, j) = 0.0;
        return out;
      }
      case Kind::Psd: {
        if (Y.rows() != Y.cols()) throw DimensionError("PSD projection needs a square gain, got " + shape_of(Y));
        if (contains(Y)) return Y;
        const Matrix S = symmetrize(Y);
        Eigen::SelfAdjointEigenSolver<Matrix> es(S);
        const Vector clipped = es.eigenvalues().cwiseMax(0.0);
        const Matrix P = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
        return 0.5 * (P + P.transpose());
      }
    }
    return Y;
  }

  /// Membership. Pattern membership is exact; PSD allows eigenvalues down to
  /// -psd_tol * max(1, |K|_F) and requires exact symmetry.
  bool contains(const Matrix& K, double psd_tol = 1e-12) const {
    switch (kind_) {
      case Kind::Full: return true;
      case Kind::Pattern:
        check_mask_shape(K);
        for (Index j = 0; j < K.cols(); ++j)
          for (Index i = 0; i < K.rows(); ++i)
            if (mask_(i, j) != 0.0 && K(i, j) != 0.0) return false;
        return true;
      case Kind::Psd: {
        if (K.rows() != K.cols()) return false;
        if (K != K.transpose()) return false;
        if (K.size() == 0) return true;
        return lambda_min_sym(K) >= -psd_tol * std::max(1.0, K.norm());
      }
    }
    return false;
  }

 private:
  ConstraintSet(Kind kind, Matrix mask) : kind_(kind), mask_(std::move(mask)) {}

  void check_mask_shape(const Matrix& Y) const {
    if (Y.rows() != mask_.rows() || Y.cols() != mask_.cols()) {
      throw DimensionError("pattern mask is " + shape_of(mask_) + " but gain is " + shape_of(Y));
    }
  }

  Kind kind_;
  Matrix mask_;
};

}  // namespace pgp_lqr
