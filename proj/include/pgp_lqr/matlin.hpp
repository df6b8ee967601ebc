#pragma once

// Dense real-matrix kernels: matrix exponential, continuous Lyapunov solvers,
// finite-horizon cost integrals, spectral abscissa, left pseudoinverse and
// isometric symmetric vectorization.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pgp_lqr/errors.hpp"

namespace pgp_lqr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kDefaultHurwitzMargin = 1e-9;

inline std::string shape_of(const Matrix& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

inline void require_square(const Matrix& M, const char* what) {
  if (M.rows() != M.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape_of(M));
  }
}

inline void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw NumericalError(std::string(what) + ": matrix has non-finite entries");
}

inline bool is_symmetric(const Matrix& S, double tol = 1e-12) {
  if (S.rows() != S.cols()) return false;
  const double scale = 1.0 + (S.size() ? S.cwiseAbs().maxCoeff() : 0.0);
  return (S - S.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline Matrix symmetrize(const Matrix& S) { return 0.5 * (S + S.transpose()); }

/// e^M by scaling and squaring with a Padé approximant (Eigen's MatrixFunctions).
inline Matrix expm(const Matrix& M) {
  require_square(M, "expm");
  require_finite(M, "expm");
  if (M.size() == 0) return M;
  return M.exp();
}

/// Largest real part over the eigenvalues of M.
inline double spectral_abscissa(const Matrix& M) {
  require_square(M, "spectral_abscissa");
  require_finite(M, "spectral_abscissa");
  Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_abscissa: eigenvalue iteration failed");
  return es.eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const Matrix& M, double margin = kDefaultHurwitzMargin) {
  return spectral_abscissa(M) < -margin;
}

inline double lambda_min_sym(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double lambda_max_sym(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double norm2(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

namespace detail {

// Solves op X + X op^T + W = 0 through the Kronecker form
// (I (x) op + op (x) I) vec(X) = -vec(W), with one refinement step.
inline Matrix kron_lyapunov(const Matrix& op, const Matrix& W, const char* what) {
  const Index n = op.rows();
  const Index nn = n * n;
  Matrix K = Matrix::Zero(nn, nn);
  for (Index j = 0; j < n; ++j) {
    K.block(j * n, j * n, n, n) += op;
    for (Index i = 0; i < n; ++i) {
      K.block(i * n, j * n, n, n).diagonal().array() += op(i, j);
    }
  }
  Eigen::PartialPivLU<Matrix> lu(K);
  const Vector rhs = -Eigen::Map<const Vector>(W.data(), nn);
  Vector x = lu.solve(rhs);
  x += lu.solve(rhs - K * x);
  if (!x.allFinite()) throw NumericalError(std::string(what) + ": singular Kronecker system");
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, n);
  return symmetrize(X);
}

inline void check_lyapunov_inputs(const Matrix& A, const Matrix& W, double margin, const char* what) {
  require_square(A, what);
  require_square(W, what);
  if (A.rows() != W.rows()) {
    throw DimensionError(std::string(what) + ": A is " + shape_of(A) + " but W is " + shape_of(W));
  }
  require_finite(A, what);
  require_finite(W, what);
  if (!is_symmetric(W, 1e-10)) throw DimensionError(std::string(what) + ": W must be symmetric");
  const double abscissa = spectral_abscissa(A);
  if (!(abscissa < -margin)) {
    std::ostringstream os;
    os << what << ": A is not Hurwitz (spectral abscissa " << abscissa << ")";
    throw StabilityError(os.str());
  }
}

}  // namespace detail

/// Solves A^T X + X A + W = 0 for Hurwitz A.
inline Matrix solve_lyap_dual(const Matrix& A, const Matrix& W, double margin = kDefaultHurwitzMargin) {
  detail::check_lyapunov_inputs(A, W, margin, "solve_lyap_dual");
  return detail::kron_lyapunov(A.transpose(), W, "solve_lyap_dual");
}

/// Solves A Y + Y A^T + W = 0 for Hurwitz A. W need not be PSD.
inline Matrix solve_lyap_primal(const Matrix& A, const Matrix& W, double margin = kDefaultHurwitzMargin) {
  detail::check_lyapunov_inputs(A, W, margin, "solve_lyap_primal");
  return detail::kron_lyapunov(A, W, "solve_lyap_primal");
}

/// Transition matrix e^{A t} together with G(t) = int_0^t e^{A^T s} W e^{A s} ds.
struct PropagatorBlock {
  Matrix transition;
  Matrix cost;
};

/// Van Loan block evaluation of the cost integral. The augmented exponential is
/// taken over a short sub-interval h = t / 2^j with |A| h <= 1/2, then doubled:
///   G(2h) = G(h) + e^{A^T h} G(h) e^{A h},   e^{A 2h} = (e^{A h})^2.
/// Stiff matrices would otherwise lose every digit to e^{-A^T t} in the block.
inline PropagatorBlock propagator_block(const Matrix& A, const Matrix& W, double t) {
  require_square(A, "propagator_block");
  require_square(W, "propagator_block");
  if (A.rows() != W.rows()) throw DimensionError("propagator_block: A and W differ in size");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DimensionError("propagator_block: t must be finite and >= 0");
  require_finite(A, "propagator_block");
  require_finite(W, "propagator_block");
  const Index n = A.rows();
  if (t == 0.0) return {Matrix::Identity(n, n), Matrix::Zero(n, n)};

  const double a_norm = A.cwiseAbs().colwise().sum().maxCoeff();
  int doublings = 0;
  double h = t;
  while (a_norm * h > 0.5 && doublings < 200) {
    h *= 0.5;
    ++doublings;
  }

  Matrix Z = Matrix::Zero(2 * n, 2 * n);
  Z.topLeftCorner(n, n) = -A.transpose() * h;
  Z.topRightCorner(n, n) = W * h;
  Z.bottomRightCorner(n, n) = A * h;
  const Matrix E = Z.exp();
  Matrix phi = E.bottomRightCorner(n, n);
  Matrix G = symmetrize(phi.transpose() * E.topRightCorner(n, n));
  for (int k = 0; k < doublings; ++k) {
    G = symmetrize(G + phi.transpose() * G * phi);
    phi = phi * phi;
  }
  return {std::move(phi), std::move(G)};
}

/// G(t) = int_0^t e^{A^T s} W e^{A s} ds.
inline Matrix cost_integral_block(const Matrix& A, const Matrix& W, double t) {
  return propagator_block(A, W, t).cost;
}

/// Left pseudoinverse (F^T F)^{-1} F^T of a tall full-column-rank matrix.
inline Matrix pinv_tall(const Matrix& F, double rel_tol = 1e-12) {
  if (F.rows() < F.cols()) throw DimensionError("pinv_tall: expected rows >= cols, got " + shape_of(F));
  require_finite(F, "pinv_tall");
  Eigen::JacobiSVD<Matrix> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double smallest = sv.size() ? sv(sv.size() - 1) : 0.0;
  if (sv.size() == 0 || !(smallest > rel_tol * sv(0))) {
    std::ostringstream os;
    os << "pinv_tall: matrix is column-rank deficient (smallest singular value " << smallest << ")";
    throw RankError(os.str(), smallest);
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

inline Index sym_vec_size(Index d) { return d * (d + 1) / 2; }

/// Column-wise lower triangle, diagonal entry first in each column, with
/// off-diagonal entries scaled by sqrt(2) so the Frobenius inner product is
/// preserved.
inline Vector sym_vec(const Matrix& S) {
  require_square(S, "sym_vec");
  if (!is_symmetric(S)) throw DimensionError("sym_vec: input is not symmetric");
  const Index d = S.rows();
  Vector v(sym_vec_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    v(k++) = S(j, j);
    for (Index i = j + 1; i < d; ++i) v(k++) = std::numbers::sqrt2 * 0.5 * (S(i, j) + S(j, i));
  }
  return v;
}

inline Matrix sym_unvec(const Vector& v) {
  const double root = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const Index d = static_cast<Index>(std::llround(root));
  if (sym_vec_size(d) != v.size()) {
    throw DimensionError("sym_unvec: length " + std::to_string(v.size()) + " is not triangular");
  }
  Matrix S(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    S(j, j) = v(k++);
    for (Index i = j + 1; i < d; ++i) {
      S(i, j) = S(j, i) = v(k++) / std::numbers::sqrt2;
    }
  }
  return S;
}

/// sym_vec(y y^T) without forming the outer product.
inline Vector sym_vec_outer(const Vector& y) {
  const Index d = y.size();
  Vector v(sym_vec_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j) {
    v(k++) = y(j) * y(j);
    for (Index i = j + 1; i < d; ++i) v(k++) = std::numbers::sqrt2 * y(i) * y(j);
  }
  return v;
}

}  // namespace pgp_lqr
