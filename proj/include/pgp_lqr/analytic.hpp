#pragma once

// Model-based oracle: exact cost, value, gradient and gradient mapping of
// f(K) = tr(X Sigma), the reconstruction matrix of stacked observations, and
// the sublevel-set constants that drive step sizes and theory checks.

#include <cmath>
#include <sstream>
#include <string>

#include "pgp_lqr/constraint.hpp"
#include "pgp_lqr/matlin.hpp"
#include "pgp_lqr/system.hpp"

namespace pgp_lqr {

enum class Stability { Unknown, Stable, Unstable };

/// Static output-feedback gain u = -K y with a cached stability verdict.
struct FeedbackGain {
  Matrix K;
  Stability stability = Stability::Unknown;

  static FeedbackGain classify(const SystemParams& sys, Matrix K, double margin = kDefaultHurwitzMargin) {
    const bool stable = is_hurwitz(closed_loop(sys, K), margin);
    return {std::move(K), stable ? Stability::Stable : Stability::Unstable};
  }
};

/// Closed-loop Lyapunov solutions for a stabilizing gain:
///   A_K^T X + X A_K + C^T (Q + K^T R K) C = 0,   A_K Y + Y A_K^T + Sigma = 0.
struct LyapunovPair {
  Matrix closed_loop;
  Matrix X;
  Matrix Y;
};

inline LyapunovPair lyapunov_pair(const SystemParams& sys, const Matrix& K) {
  LyapunovPair out;
  out.closed_loop = closed_loop(sys, K);
  if (!is_hurwitz(out.closed_loop)) {
    std::ostringstream os;
    os << "gain does not stabilize the plant (spectral abscissa of A - BKC = "
       << spectral_abscissa(out.closed_loop) << "); f(K) is infinite";
    throw StabilityError(os.str());
  }
  out.X = solve_lyap_dual(out.closed_loop, closed_loop_weight(sys, K));
  out.Y = solve_lyap_primal(out.closed_loop, sys.init.sigma);
  return out;
}

/// Cost-to-go matrix X of the closed loop.
inline Matrix value_matrix(const SystemParams& sys, const Matrix& K) {
  const Matrix AK = closed_loop(sys, K);
  if (!is_hurwitz(AK)) throw StabilityError("value_matrix: gain does not stabilize the plant");
  return solve_lyap_dual(AK, closed_loop_weight(sys, K));
}

/// f(K) = tr(X Sigma).
inline double exact_cost(const SystemParams& sys, const Matrix& K) {
  return (value_matrix(sys, K) * sys.init.sigma).trace();
}

/// f~(K; x0) = x0^T X x0.
inline double exact_value(const SystemParams& sys, const Matrix& K, const Vector& x0) {
  if (x0.size() != sys.n()) throw DimensionError("exact_value: x0 has wrong length");
  return x0.dot(value_matrix(sys, K) * x0);
}

/// grad f(K) = 2 (R K C - B^T X) Y C^T.
inline Matrix exact_gradient(const SystemParams& sys, const Matrix& K) {
  const LyapunovPair ly = lyapunov_pair(sys, K);
  return 2.0 * (sys.R * K * sys.C - sys.B.transpose() * ly.X) * ly.Y * sys.C.transpose();
}

/// Y' solving A_K Y' + Y' A_K^T - (B E C Y + (B E C Y)^T) = 0.
inline Matrix y_prime(const SystemParams& sys, const Matrix& K, const Matrix& E) {
  const LyapunovPair ly = lyapunov_pair(sys, K);
  const Matrix BECY = sys.B * E * sys.C * ly.Y;
  return solve_lyap_primal(ly.closed_loop, -(BECY + BECY.transpose()));
}

/// E over x(0) of the finite-horizon cost: tr(Sigma int_0^tau e^{A_K^T t} W e^{A_K t} dt).
/// Defined for any gain, stabilizing or not.
inline double truncated_cost(const SystemParams& sys, const Matrix& K, double tau) {
  return (cost_integral_block(closed_loop(sys, K), closed_loop_weight(sys, K), tau) * sys.init.sigma).trace();
}

/// S(a) membership: stabilizing and f(K) <= a.
inline bool in_sublevel(const SystemParams& sys, const Matrix& K, double a) {
  if (!is_hurwitz(closed_loop(sys, K))) return false;
  return exact_cost(sys, K) <= a;
}

/// G_alpha(K) = (proj(K - alpha grad f(K)) - K) / alpha.
inline Matrix gradient_mapping(const SystemParams& sys, const Matrix& K, double alpha, const ConstraintSet& omega) {
  if (!(alpha > 0.0)) throw ConfigError("gradient_mapping: alpha must be > 0");
  const Matrix grad = exact_gradient(sys, K);
  return (omega.project(K - alpha * grad) - K) / alpha;
}

/// F = [C; C e^{A_K h_1}; ...; C e^{A_K h_{D-1}}], so that ybar(0; x0) = F x0.
inline Matrix reconstruction_matrix(const SystemParams& sys, const Matrix& K, const DelayGrid& grid) {
  grid.validate();
  const Matrix AK = closed_loop(sys, K);
  const Index p = sys.p();
  Matrix F(p * grid.count(), sys.n());
  for (Index j = 0; j < grid.count(); ++j) {
    F.middleRows(j * p, p) = sys.C * expm(AK * grid.delays[static_cast<std::size_t>(j)]);
  }
  return F;
}

/// P(K) = (F^+)^T X F^+, the quadratic form of the value on stacked observations.
inline Matrix stacked_value_matrix(const SystemParams& sys, const Matrix& K, const DelayGrid& grid) {
  const Matrix Fp = pinv_tall(reconstruction_matrix(sys, K, grid), 1e-14);
  return symmetrize(Fp.transpose() * value_matrix(sys, K) * Fp);
}

/// Sublevel-set constants for S(a) relative to a reference gain K0.
struct SublevelConstants {
  double a = 0.0;
  double kappa = 0.0;     // |K|_2 <= kappa on S(a)
  double xi = 0.0;        // output-norm threshold 1 / (4 |B|_2 kappa)
  double sigma = 0.0;     // -lambda_max(A_K0 + A_K0^T) / 2
  double x_bound = 0.0;   // |X|_2 bound
  double y_bound = 0.0;   // |Y|_2 bound
  double yp_bound = 0.0;  // |Y'|_2 bound for |E|_F = 1
  double L = 0.0;         // smoothness constant of f on S(a)
  double a_bound = 0.0;   // |A_K|_2 bound
  double eta = 0.0;       // lambda_min(Sigma) / y_bound(2a)
  double beta = 0.0;      // 2 a_bound
};

/// Plant norms entering the constants.
struct PlantNorms {
  double A2, B2, C2, BF, CF, RF;
  double lmin_sigma, sigma2, lmin_R, lmax_R, lmin_Q, lmin_CCt;
  Index n;
};

inline PlantNorms plant_norms(const SystemParams& sys) {
  return {norm2(sys.A),
          norm2(sys.B),
          norm2(sys.C),
          sys.B.norm(),
          sys.C.norm(),
          sys.R.norm(),
          lambda_min_sym(sys.init.sigma),
          lambda_max_sym(sys.init.sigma),
          lambda_min_sym(sys.R),
          lambda_max_sym(sys.R),
          lambda_min_sym(sys.Q),
          lambda_min_sym(symmetrize(sys.C * sys.C.transpose())),
          sys.n()};
}

namespace detail {

struct LevelTerms {
  double kappa, xi, x_bound, y_bound, yp_bound, L, a_bound;
};

inline LevelTerms level_terms(const PlantNorms& pn, double sigma, double a) {
  LevelTerms t{};
  t.kappa = 2.0 * pn.B2 * pn.C2 * a / (pn.lmin_sigma * pn.lmin_R * pn.lmin_CCt) + pn.A2 / (pn.B2 * pn.C2);
  t.xi = 1.0 / (4.0 * pn.B2 * t.kappa);
  t.x_bound = a / pn.lmin_sigma;
  t.y_bound = std::max(a / (t.xi * t.xi * pn.lmin_Q), pn.sigma2 / sigma);
  t.yp_bound = 2.0 * pn.B2 * pn.C2 * t.y_bound * t.y_bound / pn.lmin_sigma;
  const double n = static_cast<double>(pn.n);
  t.L = 2.0 * pn.lmax_R * pn.CF * pn.CF * t.y_bound +
        4.0 * (std::sqrt(n) * pn.RF * t.kappa * pn.CF + n * pn.BF * t.x_bound) * t.yp_bound * pn.CF;
  t.a_bound = pn.A2 + pn.B2 * pn.C2 * t.kappa;
  return t;
}

}  // namespace detail

/// Contraction rate sigma = -lambda_max(A_K0 + A_K0^T) / 2 of the reference gain.
inline double contraction_rate(const SystemParams& sys, const Matrix& K0) {
  const Matrix AK0 = closed_loop(sys, K0);
  return -0.5 * lambda_max_sym(symmetrize(AK0 + AK0.transpose()));
}

inline SublevelConstants constants(const SystemParams& sys, const Matrix& K0, double a) {
  const double sigma = contraction_rate(sys, K0);
  if (!(sigma > 0.0)) {
    std::ostringstream os;
    os << "constants: A_K0 + A_K0^T is not negative definite (lambda_max = " << -2.0 * sigma
       << "); express the plant in coordinates where it is";
    throw ConfigError(os.str());
  }
  const PlantNorms pn = plant_norms(sys);
  if (!(pn.lmin_CCt > 1e-14 * pn.C2 * pn.C2)) {
    std::ostringstream os;
    os << "constants: C row-rank deficient: lambda_min(C C^T) = " << pn.lmin_CCt;
    throw ConfigError(os.str());
  }
  if (!(pn.lmin_sigma > 0.0)) throw ConfigError("constants: Sigma is not positive definite");
  const double f0 = exact_cost(sys, K0);
  if (!(a >= f0)) {
    std::ostringstream os;
    os << "constants: sublevel value a = " << a << " is below f(K0) = " << f0;
    throw ConfigError(os.str());
  }
  const detail::LevelTerms at_a = detail::level_terms(pn, sigma, a);
  const detail::LevelTerms at_2a = detail::level_terms(pn, sigma, 2.0 * a);
  SublevelConstants c;
  c.a = a;
  c.kappa = at_a.kappa;
  c.xi = at_a.xi;
  c.sigma = sigma;
  c.x_bound = at_a.x_bound;
  c.y_bound = at_a.y_bound;
  c.yp_bound = at_a.yp_bound;
  c.L = at_a.L;
  c.a_bound = at_a.a_bound;
  c.eta = pn.lmin_sigma / at_2a.y_bound;
  c.beta = 2.0 * at_a.a_bound;
  return c;
}

}  // namespace pgp_lqr
