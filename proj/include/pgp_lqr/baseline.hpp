#pragma once

// Value-model identification from stacked output observations (Bellman least
// squares) and the baseline-corrected gradient estimator built on it.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "pgp_lqr/blackbox.hpp"
#include "pgp_lqr/zeroth.hpp"

namespace pgp_lqr {

/// Smallest integer D with D > 2(n - 1) + T beta / (2 pi).
inline Index min_delay_count(Index n, double T, double beta) {
  if (n < 1) throw ConfigError("min_delay_count: n must be >= 1");
  if (!(T > 0.0) || !(beta > 0.0)) throw ConfigError("min_delay_count: T and beta must be > 0");
  const double bound = 2.0 * static_cast<double>(n - 1) + T * beta / (2.0 * std::numbers::pi);
  if (!(bound < 1e15)) throw ConfigError("min_delay_count: bound is astronomically large; choose a smaller window T");
  return static_cast<Index>(std::floor(bound)) + 1;
}

struct BellmanDataset {
  std::vector<BellmanSample> records;
  DelayGrid grid;
  double s = 0.0;
  Matrix gain;
  Index rank = 0;     // rank of the Bellman regressors
  long rollouts = 0;  // including discarded draws

  std::size_t size() const { return records.size(); }
};

struct BellmanConfig {
  double s = 1.0;
  Index samples = 0;         // 0 means n(n+1)/2
  int max_extra = 0;         // extra draws allowed on rank deficiency; 0 means n(n+1)/2
  double rank_tol = 1e-10;   // relative singular-value threshold
  unsigned workers = 1;
};

namespace detail {

inline Vector bellman_regressor(const BellmanSample& rec) {
  return sym_vec_outer(rec.y_start) - sym_vec_outer(rec.y_later);
}

inline Matrix bellman_design(const std::vector<BellmanSample>& records) {
  if (records.empty()) return Matrix();
  const Index cols = sym_vec_size(records.front().y_start.size());
  Matrix Phi(static_cast<Index>(records.size()), cols);
  for (std::size_t i = 0; i < records.size(); ++i) Phi.row(static_cast<Index>(i)) = bellman_regressor(records[i]).transpose();
  return Phi;
}

// Numerical rank of the design with rows scaled to unit length.
inline Index design_rank(const Matrix& Phi, double rel_tol) {
  if (Phi.rows() == 0) return 0;
  Matrix scaled = Phi;
  for (Index i = 0; i < scaled.rows(); ++i) {
    const double nr = scaled.row(i).norm();
    if (nr > 0.0) scaled.row(i) /= nr;
  }
  Eigen::JacobiSVD<Matrix> svd(scaled);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > rel_tol * sv(0)) ++rank;
  return rank;
}

}  // namespace detail

/// Bellman records under gain K: record j uses sub-stream j of `seed` for x_j(0)
/// and one rollout to s + T. Draws with ybar(0) = 0 are skipped; on a rank
/// shortfall, further draws are appended until the regressors reach rank
/// n(n+1)/2 or the extra-draw budget runs out.
inline BellmanDataset collect_bellman_data(const RolloutOracle& box, const Matrix& K, const DelayGrid& grid,
                                           const BellmanConfig& cfg, std::uint64_t seed) {
  grid.validate();
  if (!(cfg.s > 0.0)) throw ConfigError("collect_bellman_data: s must be > 0");
  const Index n = box.state_dim();
  const Index target = n * (n + 1) / 2;
  const Index want = cfg.samples > 0 ? cfg.samples : target;
  const int extra = cfg.max_extra > 0 ? cfg.max_extra : static_cast<int>(target);
  const CounterRng master(seed);

  auto draw = [&](std::size_t j) {
    CounterRng rng = master.substream(j);
    const Vector x0 = box.sample_initial(rng);
    return box.bellman_rollout(K, x0, cfg.s, grid);
  };

  BellmanDataset data;
  data.grid = grid;
  data.s = cfg.s;
  data.gain = K;
  std::vector<BellmanSample> first(static_cast<std::size_t>(want));
  parallel_for(first.size(), cfg.workers, [&](std::size_t j) { first[j] = draw(j); });
  data.rollouts = want;
  for (BellmanSample& rec : first)
    if (rec.y_start.cwiseAbs().maxCoeff() > 0.0) data.records.push_back(std::move(rec));

  std::size_t next = static_cast<std::size_t>(want);
  data.rank = detail::design_rank(detail::bellman_design(data.records), cfg.rank_tol);
  for (int k = 0; k < extra && (data.rank < target || static_cast<Index>(data.records.size()) < want); ++k) {
    BellmanSample rec = draw(next++);
    ++data.rollouts;
    if (!(rec.y_start.cwiseAbs().maxCoeff() > 0.0)) continue;
    data.records.push_back(std::move(rec));
    data.rank = detail::design_rank(detail::bellman_design(data.records), cfg.rank_tol);
  }
  if (data.rank < target) {
    std::ostringstream os;
    os << "collect_bellman_data: Bellman regressors reach rank " << data.rank << " of the required " << target
       << " after " << data.rollouts << " draws; increase the delay count D or the window T";
    throw IdentifiabilityError(os.str(), data.rank);
  }
  return data;
}

/// Fitted quadratic form f^(K; x0) = ybar(0; x0)^T P ybar(0; x0).
struct ValueModel {
  Matrix P;
  DelayGrid grid;
  double s = 0.0;
  Matrix gain;
  double fit_residual = 0.0;  // max |Bellman residual| over the fitting data
  Index rank = 0;
  Index samples = 0;
};

/// Minimum-norm least-squares solution of <P, y0 y0^T - ys ys^T> = f~_s over
/// symmetric P, in sym_vec coordinates.
inline ValueModel fit_value_model(const BellmanDataset& data, double rel_tol = 1e-12) {
  if (data.records.empty()) throw IdentifiabilityError("fit_value_model: empty dataset", 0);
  const Index pd = data.records.front().y_start.size();
  for (const BellmanSample& rec : data.records) {
    if (rec.y_start.size() != pd || rec.y_later.size() != pd) throw DimensionError("fit_value_model: ragged dataset");
  }
  const Matrix Phi = detail::bellman_design(data.records);
  Vector c(Phi.rows());
  for (std::size_t i = 0; i < data.records.size(); ++i) c(static_cast<Index>(i)) = data.records[i].cost;

  // Column scaling keeps the rank decision meaningful when outputs differ in size.
  Vector col_scale = Phi.colwise().norm().transpose();
  for (Index j = 0; j < col_scale.size(); ++j)
    if (!(col_scale(j) > 0.0)) col_scale(j) = 1.0;
  const Matrix scaled = Phi * col_scale.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod;
  cod.setThreshold(rel_tol);
  cod.compute(scaled);
  const Vector z = cod.solve(c);
  if (!z.allFinite()) throw IdentifiabilityError("fit_value_model: least-squares solution is not finite", cod.rank());

  ValueModel model;
  model.P = sym_unvec(z.cwiseQuotient(col_scale));
  model.grid = data.grid;
  model.s = data.s;
  model.gain = data.gain;
  model.rank = cod.rank();
  model.samples = static_cast<Index>(data.records.size());
  model.fit_residual = (Phi * sym_vec(model.P) - c).cwiseAbs().maxCoeff();
  if (model.rank < data.rank) {
    std::ostringstream os;
    os << "fit_value_model: Bellman system is numerically singular (rank " << model.rank << ", data rank "
       << data.rank << ")";
    throw IdentifiabilityError(os.str(), model.rank);
  }
  return model;
}

inline double value_estimate(const ValueModel& model, const Vector& y0) {
  if (y0.size() != model.P.rows()) throw DimensionError("value_estimate: stacked observation has wrong length");
  return y0.dot(model.P * y0);
}

/// Baseline-corrected estimate with b = f^(K; .). Each sample spends one
/// auxiliary unperturbed rollout of length T from x_i(0) to read ybar(0; x_i(0)).
inline GradientEstimate estimate_gradient_vr(const RolloutOracle& box, const Matrix& K, const EstimatorConfig& cfg,
                                             const ValueModel& model) {
  if (model.gain.rows() != K.rows() || model.gain.cols() != K.cols() ||
      (model.gain - K).norm() > 1e-12 * (1.0 + K.norm())) {
    throw UsageError("estimate_gradient_vr: value model was fit for a different gain");
  }
  GradientEstimate est = estimate_gradient_with_baseline(box, K, cfg, [&](const Vector& x0) {
    return value_estimate(model, box.observe_stacked(K, x0, model.grid));
  });
  est.auxiliary_rollouts = cfg.N;
  return est;
}

/// Constant baseline: mean of f^ over the fitting data's ybar(0).
inline double dataset_mean_baseline(const ValueModel& model, const BellmanDataset& data) {
  if (data.records.empty()) throw UsageError("dataset_mean_baseline: empty dataset");
  double sum = 0.0;
  for (const BellmanSample& rec : data.records) sum += value_estimate(model, rec.y_start);
  return sum / static_cast<double>(data.records.size());
}

/// Monte-Carlo b*(x0) = E_U f~_tau(K + r U; x0) over M sphere draws (r = 0 allowed).
inline double optimal_baseline_mc(const RolloutOracle& box, const Matrix& K, const Vector& x0, double r, double tau,
                                  int M, std::uint64_t seed, double cost_ceiling = 1e12, unsigned workers = 1) {
  if (M < 1) throw ConfigError("optimal_baseline_mc: M must be >= 1");
  if (!(r >= 0.0)) throw ConfigError("optimal_baseline_mc: r must be >= 0");
  if (r == 0.0) return box.rollout_cost(K, x0, tau);
  std::vector<double> costs(static_cast<std::size_t>(M));
  const CounterRng master(seed);
  parallel_for(costs.size(), workers, [&](std::size_t i) {
    CounterRng rng = master.substream(i);
    const Matrix U = sample_sphere(box.input_dim(), box.output_dim(), rng);
    double c;
    try {
      c = box.rollout_cost(K + r * U, x0, tau);
    } catch (const DivergenceError&) {
      c = cost_ceiling;
    }
    costs[i] = std::min(c, cost_ceiling);
  });
  double sum = 0.0;
  for (const double c : costs) sum += c;
  return sum / static_cast<double>(M);
}

}  // namespace pgp_lqr
