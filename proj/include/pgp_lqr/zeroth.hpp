#pragma once

// Zeroth-order gradient estimation through the rollout oracle, plus the
// diagnostics used to study its error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pgp_lqr/analytic.hpp"
#include "pgp_lqr/blackbox.hpp"
#include "pgp_lqr/parallel.hpp"

namespace pgp_lqr {

struct EstimatorConfig {
  int N = 2;
  double r = 1e-3;
  double tau = 100.0;
  std::uint64_t seed = 0;
  double cost_ceiling = 1e12;
  bool retain_samples = false;
  unsigned workers = 1;

  void validate() const {
    if (N < 1) throw ConfigError("estimator: N must be >= 1");
    if (!(r > 0.0)) throw ConfigError("estimator: r must be > 0");
    if (!(tau > 0.0)) throw ConfigError("estimator: tau must be > 0");
    if (!(cost_ceiling > 0.0)) throw ConfigError("estimator: cost ceiling must be > 0");
  }
};

struct GradientEstimate {
  Matrix gradient;
  std::vector<double> costs;          // c_i after the ceiling
  std::vector<double> baselines;      // b(x_i(0)); empty for the plain estimator
  std::vector<Matrix> perturbations;  // U_i, only when retained
  int diverged = 0;
  long rollouts = 0;            // perturbed rollouts
  long auxiliary_rollouts = 0;  // unperturbed rollouts spent on the baseline
};

/// Seed for (master, a, b) triples: first output of the stream (master, a), sub-stream b.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  CounterRng rng = CounterRng(master, a).substream(b);
  return rng.next_u64();
}

/// U uniform on {U in R^{m x p} : |U|_F = sqrt(m p)}: Gaussian fill, then rescale.
inline Matrix sample_sphere(Index m, Index p, CounterRng& rng) {
  Matrix U(m, p);
  double norm = 0.0;
  while (!(norm > 0.0)) {
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < p; ++j) U(i, j) = rng.normal();
    norm = U.norm();
  }
  return U * (std::sqrt(static_cast<double>(m * p)) / norm);
}

/// b(x0) for the baseline-corrected estimator; nullptr means b = 0.
using BaselineFn = std::function<double(const Vector& x0)>;

/// (1 / (r N)) sum_i (c_i - b(x_i(0))) U_i with c_i = f~_tau(K + r U_i; x_i(0)).
///
/// Sample i draws from sub-stream i of cfg.seed: first U_i (row-major normals),
/// then x_i(0). Rollouts that diverge, or costs above the ceiling, are clipped
/// to the ceiling and counted.
inline GradientEstimate estimate_gradient_with_baseline(const RolloutOracle& box, const Matrix& K,
                                                        const EstimatorConfig& cfg, const BaselineFn& baseline) {
  cfg.validate();
  const Index m = box.input_dim(), p = box.output_dim();
  if (K.rows() != m || K.cols() != p) throw DimensionError("estimate_gradient: gain has wrong shape " + shape_of(K));
  const auto count = static_cast<std::size_t>(cfg.N);
  std::vector<Matrix> U(count);
  std::vector<double> c(count), b(count, 0.0);
  std::vector<char> diverged(count, 0);
  const CounterRng master(cfg.seed);

  parallel_for(count, cfg.workers, [&](std::size_t i) {
    CounterRng rng = master.substream(i);
    U[i] = sample_sphere(m, p, rng);
    const Vector x0 = box.sample_initial(rng);
    double cost;
    try {
      cost = box.rollout_cost(K + cfg.r * U[i], x0, cfg.tau);
    } catch (const DivergenceError&) {
      cost = std::numeric_limits<double>::infinity();
    }
    if (!(cost <= cfg.cost_ceiling)) {
      diverged[i] = 1;
      cost = cfg.cost_ceiling;
    }
    c[i] = cost;
    if (baseline) b[i] = baseline(x0);
  });

  GradientEstimate est;
  est.gradient = Matrix::Zero(m, p);
  for (std::size_t i = 0; i < count; ++i) {
    est.gradient += (c[i] - b[i]) * U[i];
    est.diverged += diverged[i];
  }
  est.gradient /= cfg.r * static_cast<double>(cfg.N);
  if (est.diverged == cfg.N) {
    std::ostringstream os;
    os << "estimate_gradient: all " << cfg.N << " rollouts diverged; reduce the smoothing radius r (now " << cfg.r
       << ")";
    throw EstimationError(os.str());
  }
  est.rollouts = cfg.N;
  est.costs = std::move(c);
  if (baseline) {
    est.baselines = std::move(b);
  }
  if (cfg.retain_samples) est.perturbations = std::move(U);
  return est;
}

/// Plain zeroth-order estimate (b = 0).
inline GradientEstimate estimate_gradient(const RolloutOracle& box, const Matrix& K, const EstimatorConfig& cfg) {
  return estimate_gradient_with_baseline(box, K, cfg, nullptr);
}

/// Largest candidate radius r, scanning candidates in increasing order, for which
/// every probe K + r U_j stays in S(2a). The same probe directions are reused
/// for every candidate.
inline double safe_radius(const SystemParams& sys, const Matrix& K, double a, std::vector<double> candidates,
                          int probes, std::uint64_t seed) {
  std::sort(candidates.begin(), candidates.end());
  CounterRng rng(seed);
  std::vector<Matrix> dirs;
  dirs.reserve(static_cast<std::size_t>(probes));
  for (int j = 0; j < probes; ++j) dirs.push_back(sample_sphere(sys.m(), sys.p(), rng));
  double best = 0.0;
  bool any = false;
  for (const double r : candidates) {
    if (!(r > 0.0)) continue;
    bool ok = true;
    for (const Matrix& U : dirs) {
      if (!in_sublevel(sys, K + r * U, 2.0 * a)) {
        ok = false;
        break;
      }
    }
    if (!ok) break;
    best = r;
    any = true;
  }
  if (!any) {
    throw ConfigError("safe_radius: no candidate radius keeps K + rU in S(2a); "
                      "use a larger sublevel value a or start deeper inside the sublevel set");
  }
  return best;
}

struct StudyCell {
  int N = 2;
  double r = 1e-3;
  double tau = 100.0;
};

struct StudyRow {
  int N;
  double r;
  double tau;
  int repetition;
  double rel_error;  // NaN when the estimate failed
  int diverged;
};

struct CellSummary {
  StudyCell cell;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  int failures = 0;
};

/// Estimator under study: (K, cfg) -> estimate.
using EstimatorFn = std::function<GradientEstimate(const Matrix& K, const EstimatorConfig& cfg)>;

/// Relative error |est - grad f|_F / |grad f|_F over repetitions of each cell.
/// Repetition k of cell c uses estimator seed derive_seed(seed, c, k).
inline std::vector<StudyRow> error_study(const SystemParams& sys, const Matrix& K, const std::vector<StudyCell>& cells,
                                         int repetitions, std::uint64_t seed, const EstimatorFn& estimator,
                                         unsigned workers = 1) {
  const Matrix truth = exact_gradient(sys, K);
  const double truth_norm = truth.norm();
  if (!(truth_norm > 0.0)) throw EstimationError("error_study: exact gradient vanishes; relative error undefined");
  std::vector<StudyRow> rows;
  rows.reserve(cells.size() * static_cast<std::size_t>(repetitions));
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    const StudyCell& cell = cells[ci];
    std::vector<StudyRow> block(static_cast<std::size_t>(repetitions));
    parallel_for(block.size(), workers, [&](std::size_t k) {
      EstimatorConfig cfg;
      cfg.N = cell.N;
      cfg.r = cell.r;
      cfg.tau = cell.tau;
      cfg.seed = derive_seed(seed, ci, k);
      StudyRow row{cell.N, cell.r, cell.tau, static_cast<int>(k), std::numeric_limits<double>::quiet_NaN(), cell.N};
      try {
        const GradientEstimate est = estimator(K, cfg);
        row.rel_error = (est.gradient - truth).norm() / truth_norm;
        row.diverged = est.diverged;
      } catch (const EstimationError&) {
      }
      block[k] = row;
    });
    rows.insert(rows.end(), block.begin(), block.end());
  }
  return rows;
}

inline std::vector<StudyRow> error_study(const SystemParams& sys, const Matrix& K, const std::vector<StudyCell>& cells,
                                         int repetitions, std::uint64_t seed, unsigned workers = 1) {
  const RolloutOracle box(sys);
  return error_study(
      sys, K, cells, repetitions, seed,
      [&box](const Matrix& gain, const EstimatorConfig& cfg) { return estimate_gradient(box, gain, cfg); }, workers);
}

/// Linear-interpolation quantile of finite values (q in [0, 1]).
inline double quantile(std::vector<double> values, double q) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

inline std::vector<CellSummary> summarize(const std::vector<StudyRow>& rows) {
  std::vector<CellSummary> out;
  for (const StudyRow& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
      return s.cell.N == row.N && s.cell.r == row.r && s.cell.tau == row.tau;
    });
    if (it == out.end()) {
      out.push_back({StudyCell{row.N, row.r, row.tau}});
      it = out.end() - 1;
    }
    if (!std::isfinite(row.rel_error)) ++it->failures;
  }
  for (CellSummary& s : out) {
    std::vector<double> errs;
    for (const StudyRow& row : rows) {
      if (row.N == s.cell.N && row.r == s.cell.r && row.tau == s.cell.tau) errs.push_back(row.rel_error);
    }
    s.median = quantile(errs, 0.5);
    s.q1 = quantile(errs, 0.25);
    s.q3 = quantile(errs, 0.75);
  }
  return out;
}

}  // namespace pgp_lqr
