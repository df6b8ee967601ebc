#pragma once

// LTI plant, closed-loop simulation with exact cost accumulation, stacked
// observations, initial-state distributions and the port-Hamiltonian-style
// random system generator.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pgp_lqr/matlin.hpp"
#include "pgp_lqr/rng.hpp"

namespace pgp_lqr {

enum class InitialKind { UniformCube, ScaledCube, Custom };

inline const char* to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::UniformCube: return "uniform_cube";
    case InitialKind::ScaledCube: return "scaled_cube";
    case InitialKind::Custom: return "custom";
  }
  return "unknown";
}

/// Distribution of x(0). Every kind carries its second moment Sigma = E[x x^T]
/// and an almost-sure norm bound.
///
///   UniformCube: x ~ U[-1, 1]^n, Sigma = I/3, bound sqrt(n).
///   ScaledCube:  x = S u with u ~ U[-1, 1]^n, Sigma = S S^T / 3, bound sqrt(n) |S|_2.
///   Custom:      user sampler with declared Sigma and bound.
struct InitialDistribution {
  InitialKind kind = InitialKind::UniformCube;
  Index dim = 0;
  Matrix transform;  // ScaledCube only
  Matrix sigma;
  double bound = 0.0;
  std::function<Vector(CounterRng&)> sampler;  // Custom only

  static InitialDistribution uniform_cube(Index n) {
    InitialDistribution d;
    d.kind = InitialKind::UniformCube;
    d.dim = n;
    d.sigma = Matrix::Identity(n, n) / 3.0;
    d.bound = std::sqrt(static_cast<double>(n));
    return d;
  }

  static InitialDistribution scaled_cube(Matrix S) {
    require_square(S, "scaled_cube");
    require_finite(S, "scaled_cube");
    InitialDistribution d;
    d.kind = InitialKind::ScaledCube;
    d.dim = S.rows();
    d.sigma = symmetrize(S * S.transpose()) / 3.0;
    d.bound = std::sqrt(static_cast<double>(S.rows())) * norm2(S);
    d.transform = std::move(S);
    return d;
  }

  static InitialDistribution custom(std::function<Vector(CounterRng&)> sampler, Matrix sigma, double bound) {
    InitialDistribution d;
    d.kind = InitialKind::Custom;
    d.dim = sigma.rows();
    d.sigma = std::move(sigma);
    d.bound = bound;
    d.sampler = std::move(sampler);
    return d;
  }
};

/// Draws x(0). Cube coordinates are consumed in index order.
inline Vector sample_initial(const InitialDistribution& dist, CounterRng& rng) {
  switch (dist.kind) {
    case InitialKind::UniformCube: {
      Vector x(dist.dim);
      for (Index i = 0; i < dist.dim; ++i) x(i) = rng.uniform(-1.0, 1.0);
      return x;
    }
    case InitialKind::ScaledCube: {
      Vector u(dist.dim);
      for (Index i = 0; i < dist.dim; ++i) u(i) = rng.uniform(-1.0, 1.0);
      return dist.transform * u;
    }
    case InitialKind::Custom:
      if (!dist.sampler) throw UsageError("sample_initial: custom distribution without a sampler");
      return dist.sampler(rng);
  }
  throw UsageError("sample_initial: unknown distribution kind");
}

/// Plant x' = A x + B u, y = C x with output/input cost weights Q, R.
struct SystemParams {
  Matrix A, B, C, Q, R;
  InitialDistribution init;
  std::optional<std::uint64_t> generator_seed;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }
};

/// Rank of the observability matrix of (A, C), computed with an orthogonal
/// staircase on span{C^T, A^T C^T, ...} so that powers of a stiff A never form.
inline Index observability_rank(const Matrix& A, const Matrix& C, double rel_tol = 1e-10) {
  const Index n = A.rows();
  const double a_scale = std::max(norm2(A), 1e-300);
  const Matrix At = A.transpose() / a_scale;
  Matrix basis(n, 0);
  Matrix candidates = C.transpose();
  const double c_scale = std::max(norm2(C), 1e-300);
  candidates /= c_scale;
  for (Index round = 0; round <= n && basis.cols() < n && candidates.cols() > 0; ++round) {
    if (basis.cols() > 0) candidates -= basis * (basis.transpose() * candidates);
    if (basis.cols() > 0) candidates -= basis * (basis.transpose() * candidates);
    Eigen::ColPivHouseholderQR<Matrix> qr(candidates);
    qr.setThreshold(rel_tol);
    Index rank = 0;
    const Vector diag = qr.matrixR().diagonal().cwiseAbs();
    for (Index k = 0; k < diag.size(); ++k) {
      if (diag(k) > rel_tol) ++rank;
    }
    rank = std::min(rank, n - basis.cols());
    if (rank == 0) break;
    const Matrix q = qr.householderQ() * Matrix::Identity(n, rank);
    Matrix grown(n, basis.cols() + rank);
    grown << basis, q;
    basis = std::move(grown);
    candidates = At * q;
  }
  return basis.cols();
}

/// Structural checks: dimensions, Q > 0, R > 0, B and C nonzero, (A, C) observable,
/// Sigma > 0. Throws ConfigError naming the offending field.
inline void validate(const SystemParams& sys) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  const Index n = sys.A.rows();
  if (sys.A.cols() != n || n == 0) fail("A: expected a nonempty square matrix, got " + shape_of(sys.A));
  if (sys.B.rows() != n || sys.B.cols() == 0) fail("B: expected n x m with n = " + std::to_string(n) + ", got " + shape_of(sys.B));
  if (sys.C.cols() != n || sys.C.rows() == 0) fail("C: expected p x n with n = " + std::to_string(n) + ", got " + shape_of(sys.C));
  if (sys.Q.rows() != sys.C.rows() || sys.Q.cols() != sys.C.rows()) fail("Q: expected p x p, got " + shape_of(sys.Q));
  if (sys.R.rows() != sys.B.cols() || sys.R.cols() != sys.B.cols()) fail("R: expected m x m, got " + shape_of(sys.R));
  for (auto [name, M] : {std::pair{"A", &sys.A}, {"B", &sys.B}, {"C", &sys.C}, {"Q", &sys.Q}, {"R", &sys.R}}) {
    if (!M->allFinite()) fail(std::string(name) + ": non-finite entries");
  }
  if (!is_symmetric(sys.Q, 1e-10) || lambda_min_sym(symmetrize(sys.Q)) <= 0.0) fail("Q: must be symmetric positive definite");
  if (!is_symmetric(sys.R, 1e-10) || lambda_min_sym(symmetrize(sys.R)) <= 0.0) fail("R: must be symmetric positive definite");
  if (sys.B.cwiseAbs().maxCoeff() == 0.0) fail("B: must not be the zero matrix");
  if (sys.C.cwiseAbs().maxCoeff() == 0.0) fail("C: must not be the zero matrix");
  if (sys.init.dim != n) fail("init: distribution dimension does not match n");
  if (sys.init.sigma.rows() != n || sys.init.sigma.cols() != n) fail("init: Sigma must be n x n");
  if (lambda_min_sym(symmetrize(sys.init.sigma)) <= 0.0) fail("init: Sigma must be positive definite");
  const Index rank = observability_rank(sys.A, sys.C);
  if (rank != n) {
    fail("A, C: pair is not observable (observability rank " + std::to_string(rank) + " < n = " + std::to_string(n) + ")");
  }
}

/// A - B K C.
inline Matrix closed_loop(const SystemParams& sys, const Matrix& K) {
  if (K.rows() != sys.m() || K.cols() != sys.p()) {
    throw DimensionError("closed_loop: gain must be " + std::to_string(sys.m()) + "x" + std::to_string(sys.p()) +
                         ", got " + shape_of(K));
  }
  return sys.A - sys.B * K * sys.C;
}

/// C^T (Q + K^T R K) C, the state weight of the closed-loop running cost.
inline Matrix closed_loop_weight(const SystemParams& sys, const Matrix& K) {
  return symmetrize(sys.C.transpose() * (sys.Q + K.transpose() * sys.R * K) * sys.C);
}

struct SimOptions {
  double dt = 0.05;
  double divergence_bound = 1e150;
  bool record_outputs = true;
};

struct TrajectoryRecord {
  Vector x0;
  Matrix gain;
  double horizon = 0.0;
  double cost = 0.0;
  std::vector<double> times;  // output sample times
  Matrix outputs;             // p x times.size()
  Vector final_state;
};

namespace detail {

inline std::string gain_text(const Matrix& K) {
  std::ostringstream os;
  os.precision(6);
  os << "[";
  for (Index i = 0; i < K.rows(); ++i) {
    for (Index j = 0; j < K.cols(); ++j) os << (j ? " " : (i ? "; " : "")) << K(i, j);
  }
  os << "]";
  return os.str();
}

inline void guard_state(const Vector& x, const Matrix& K, double bound, double t) {
  const double nx = x.norm();
  if (!std::isfinite(nx) || nx > bound) {
    std::ostringstream os;
    os << "rollout diverged at t = " << t << " (|x| = " << nx << ") under gain K = " << gain_text(K);
    throw DivergenceError(os.str());
  }
}

}  // namespace detail

/// Simulates x' = (A - B K C) x from x0 up to tau. The state is propagated
/// exactly on the dt grid and the cost int_0^tau y^T (Q + K^T R K) y dt is
/// accumulated from exact per-step blocks. Stability is not required; a
/// diverging trajectory raises DivergenceError.
inline TrajectoryRecord simulate_cost(const SystemParams& sys, const Matrix& K, const Vector& x0, double tau,
                                      const SimOptions& opt = {}) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw DimensionError("simulate_cost: tau must be finite and >= 0");
  if (!(opt.dt > 0.0)) throw DimensionError("simulate_cost: dt must be > 0");
  if (x0.size() != sys.n()) throw DimensionError("simulate_cost: x0 has wrong length");
  const Matrix AK = closed_loop(sys, K);
  const Matrix W = closed_loop_weight(sys, K);

  TrajectoryRecord rec;
  rec.x0 = x0;
  rec.gain = K;
  rec.horizon = tau;

  const auto full_steps = static_cast<long>(std::floor(tau / opt.dt * (1.0 + 1e-12)));
  const double covered = static_cast<double>(full_steps) * opt.dt;
  const double remainder = std::max(0.0, tau - covered);
  const bool has_tail = remainder > 1e-12 * opt.dt;

  if (opt.record_outputs) {
    rec.times.reserve(static_cast<std::size_t>(full_steps) + 2);
    rec.outputs.resize(sys.p(), full_steps + 1 + (has_tail ? 1 : 0));
  }

  Vector x = x0;
  double cost = 0.0;
  auto record = [&](Index col, double t) {
    if (!opt.record_outputs) return;
    rec.times.push_back(t);
    rec.outputs.col(col) = sys.C * x;
  };
  record(0, 0.0);

  if (full_steps > 0) {
    const PropagatorBlock step = propagator_block(AK, W, opt.dt);
    if (!step.transition.allFinite() || !step.cost.allFinite()) {
      throw DivergenceError("rollout diverged within one step under gain K = " + detail::gain_text(K));
    }
    for (long k = 0; k < full_steps; ++k) {
      cost += x.dot(step.cost * x);
      x = step.transition * x;
      detail::guard_state(x, K, opt.divergence_bound, static_cast<double>(k + 1) * opt.dt);
      record(k + 1, static_cast<double>(k + 1) * opt.dt);
    }
  }
  if (has_tail) {
    const PropagatorBlock tail = propagator_block(AK, W, remainder);
    cost += x.dot(tail.cost * x);
    x = tail.transition * x;
    detail::guard_state(x, K, opt.divergence_bound, tau);
    record(full_steps + 1, tau);
  }
  if (!std::isfinite(cost)) throw DivergenceError("rollout cost overflowed under gain K = " + detail::gain_text(K));
  rec.cost = cost;
  rec.final_state = std::move(x);
  return rec;
}

/// Delays 0 = h_0 < h_1 < ... < h_{D-1} = T of a stacked observation.
struct DelayGrid {
  std::vector<double> delays;

  static DelayGrid uniform(Index count, double window) {
    if (count < 1) throw ConfigError("DelayGrid: need at least one delay");
    DelayGrid g;
    if (count == 1) {
      g.delays = {0.0};
      return g;
    }
    if (!(window > 0.0)) throw ConfigError("DelayGrid: window T must be > 0");
    g.delays.resize(static_cast<std::size_t>(count));
    for (Index j = 0; j < count; ++j) {
      g.delays[static_cast<std::size_t>(j)] = window * static_cast<double>(j) / static_cast<double>(count - 1);
    }
    g.delays.back() = window;
    return g;
  }

  Index count() const { return static_cast<Index>(delays.size()); }
  double window() const { return delays.empty() ? 0.0 : delays.back(); }

  void validate() const {
    if (delays.empty()) throw ConfigError("DelayGrid: empty");
    if (delays.front() != 0.0) throw ConfigError("DelayGrid: first delay must be 0");
    for (std::size_t j = 1; j < delays.size(); ++j) {
      if (!(delays[j] > delays[j - 1])) throw ConfigError("DelayGrid: delays must be strictly increasing");
    }
  }
};

namespace detail {

// Stacked outputs [C x; C e^{A_K h_1} x; ...] starting from state x.
inline Vector stack_from_state(const SystemParams& sys, const Matrix& AK, const Matrix& K, const Vector& x,
                               const DelayGrid& grid, double divergence_bound, double t0) {
  const Index p = sys.p();
  Vector out(p * grid.count());
  Vector z = x;
  double last_gap = -1.0;
  Matrix phi;
  for (Index j = 0; j < grid.count(); ++j) {
    if (j > 0) {
      const double gap = grid.delays[static_cast<std::size_t>(j)] - grid.delays[static_cast<std::size_t>(j - 1)];
      if (gap != last_gap) {
        phi = expm(AK * gap);
        last_gap = gap;
      }
      z = phi * z;
      guard_state(z, K, divergence_bound, t0 + grid.delays[static_cast<std::size_t>(j)]);
    }
    out.segment(j * p, p) = sys.C * z;
  }
  return out;
}

}  // namespace detail

/// [y(t); y(t + h_1); ...; y(t + h_{D-1})] of the K-closed loop started at x0.
inline Vector stacked_observation(const SystemParams& sys, const Matrix& K, const Vector& x0, double t,
                                  const DelayGrid& grid, double divergence_bound = 1e150) {
  grid.validate();
  if (x0.size() != sys.n()) throw DimensionError("stacked_observation: x0 has wrong length");
  if (!(t >= 0.0)) throw DimensionError("stacked_observation: t must be >= 0");
  const Matrix AK = closed_loop(sys, K);
  Vector x = x0;
  if (t > 0.0) {
    x = expm(AK * t) * x0;
    detail::guard_state(x, K, divergence_bound, t);
  }
  return detail::stack_from_state(sys, AK, K, x, grid, divergence_bound, t);
}

/// Draw scales for the random plant generator.
///   B = b_offset * ones(n, m) + b_spread * rand(n, m)
///   C = c_offset * ones(p, n) + c_spread * rand(p, n)
struct GeneratorScales {
  double b_offset = 1.0;
  double b_spread = 0.5;
  double c_offset = 1.0;
  double c_spread = 0.5;
  int max_retries = 100;
  double degeneracy_tol = 1e-8;
};

/// Random plant A = (J - G) H with J = Jt - Jt^T, G = Gt Gt^T, H = Ht Ht^T
/// (Jt, Gt, Ht standard normal), Q = I, R = I, x(0) uniform on [-1, 1]^n.
///
/// The emitted system is expressed in the coordinates x' = L^T x where
/// H = L L^T (Cholesky), in which A' + A'^T = -2 L^T G L < 0. The initial
/// distribution is carried along, so x'(0) = L^T u with u uniform on the cube
/// and the cost landscape over K is the same as in the original coordinates.
///
/// Draw order from the stream: Jt, Gt, Ht (each n x n, row-major normals), then
/// B's uniforms (n x m), then C's uniforms (p x n). A degenerate draw
/// (lambda_min(G) or lambda_min(H) below tol * lambda_max) is discarded and the
/// stream continues.
inline SystemParams random_phl_system(Index n, Index m, Index p, CounterRng& rng, const GeneratorScales& scales = {}) {
  if (n < 1 || m < 1 || p < 1) throw ConfigError("random_phl_system: dimensions must be positive");
  if (n < std::max(m, p)) throw ConfigError("random_phl_system: need n >= max(m, p)");
  auto normals = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) M(i, j) = rng.normal();
    return M;
  };
  auto uniforms = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) M(i, j) = rng.uniform();
    return M;
  };

  for (int attempt = 0; attempt <= scales.max_retries; ++attempt) {
    const Matrix Jt = normals(n, n);
    const Matrix Gt = normals(n, n);
    const Matrix Ht = normals(n, n);
    const Matrix Bu = uniforms(n, m);
    const Matrix Cu = uniforms(p, n);
    const Matrix J = Jt - Jt.transpose();
    const Matrix G = symmetrize(Gt * Gt.transpose());
    const Matrix H = symmetrize(Ht * Ht.transpose());
    const double g_min = lambda_min_sym(G), h_min = lambda_min_sym(H);
    if (!(g_min > scales.degeneracy_tol * lambda_max_sym(G)) || !(h_min > scales.degeneracy_tol * lambda_max_sym(H))) {
      continue;
    }
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) continue;
    const Matrix L = llt.matrixL();
    const Matrix T = L.transpose();
    const Matrix T_inv = T.triangularView<Eigen::Upper>().solve(Matrix::Identity(n, n));

    SystemParams sys;
    sys.A = T * (J - G) * L;
    sys.B = T * (scales.b_offset * Matrix::Ones(n, m) + scales.b_spread * Bu);
    sys.C = (scales.c_offset * Matrix::Ones(p, n) + scales.c_spread * Cu) * T_inv;
    sys.Q = Matrix::Identity(p, p);
    sys.R = Matrix::Identity(m, m);
    sys.init = InitialDistribution::scaled_cube(T);
    if (!(lambda_max_sym(symmetrize(sys.A + sys.A.transpose())) < 0.0)) continue;
    return sys;
  }
  throw NumericalError("random_phl_system: exhausted retries on degenerate draws");
}

/// Small well-conditioned test plant: A = J - G with J = (Jt - Jt^T) / 2 and
/// G = I + Gt Gt^T / n, B and C standard normal, Q = I, R = I, x(0) uniform on
/// [-1, 1]^n. A + A^T <= -2I, so K = 0 is stabilizing with margin.
///
/// Draw order: Jt, Gt (n x n), B (n x m), C (p x n), all row-major normals.
/// Draws with an unobservable (A, C) or rank-deficient C are discarded.
inline SystemParams random_dissipative_system(Index n, Index m, Index p, CounterRng& rng, int max_retries = 100) {
  if (n < 1 || m < 1 || p < 1) throw ConfigError("random_dissipative_system: dimensions must be positive");
  if (p > n) throw ConfigError("random_dissipative_system: need p <= n");
  auto normals = [&](Index rows, Index cols) {
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) M(i, j) = rng.normal();
    return M;
  };
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    const Matrix Jt = normals(n, n);
    const Matrix Gt = normals(n, n);
    SystemParams sys;
    sys.B = normals(n, m);
    sys.C = normals(p, n);
    sys.A = 0.5 * (Jt - Jt.transpose()) - Matrix::Identity(n, n) - Gt * Gt.transpose() / static_cast<double>(n);
    sys.Q = Matrix::Identity(p, p);
    sys.R = Matrix::Identity(m, m);
    sys.init = InitialDistribution::uniform_cube(n);
    if (observability_rank(sys.A, sys.C) != n) continue;
    if (!(lambda_min_sym(symmetrize(sys.C * sys.C.transpose())) > 1e-3)) continue;
    return sys;
  }
  throw NumericalError("random_dissipative_system: exhausted retries");
}

}  // namespace pgp_lqr
