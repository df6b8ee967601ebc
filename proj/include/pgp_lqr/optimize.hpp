#pragma once

// Projected policy-gradient iteration K <- proj(K - alpha g(K)) with the
// step-norm termination rule, and the step-size helpers that go with it.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pgp_lqr/analytic.hpp"
#include "pgp_lqr/baseline.hpp"
#include "pgp_lqr/constraint.hpp"
#include "pgp_lqr/zeroth.hpp"

namespace pgp_lqr {

enum class BaselineKind { None, Bellman };

inline const char* to_string(BaselineKind b) { return b == BaselineKind::Bellman ? "bellman" : "none"; }

struct OptimizerConfig {
  double alpha = 1e-4;
  double epsilon = 1e-3;
  long max_iterations = 2000;
  double lambda = 0.5;
  EstimatorConfig estimator;
  BaselineKind baseline = BaselineKind::None;
  std::uint64_t seed = 0;
  bool persist = false;  // on an unstable iterate: roll back and halve alpha once
  bool record_gains = true;  // false leaves IterationRecord::K empty

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("optimizer: alpha must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("optimizer: epsilon must be > 0");
    if (max_iterations < 1) throw ConfigError("optimizer: max_iterations must be >= 1");
    if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("optimizer: lambda must lie in [0, 1)");
  }
};

/// One gradient query: estimate plus the rollouts it consumed.
struct GradientQuery {
  Matrix gradient;
  long samples = 0;
  int diverged = 0;
};

/// g(K, iteration). Model-free oracles must not touch the plant matrices.
using GradientOracle = std::function<GradientQuery(const Matrix& K, long iteration)>;

inline GradientOracle exact_gradient_oracle(const SystemParams& sys) {
  return [sys](const Matrix& K, long) { return GradientQuery{exact_gradient(sys, K), 0, 0}; };
}

/// Plain zeroth-order oracle. Iteration i uses estimator seed derive_seed(seed, i, 0).
inline GradientOracle zeroth_order_oracle(const RolloutOracle& box, EstimatorConfig est, std::uint64_t seed) {
  return [&box, est, seed](const Matrix& K, long i) {
    EstimatorConfig cfg = est;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(i), 0);
    const GradientEstimate g = estimate_gradient(box, K, cfg);
    return GradientQuery{g.gradient, g.rollouts, g.diverged};
  };
}

/// Baseline-corrected oracle refitting the value model every iteration.
/// Bellman data for iteration i uses derive_seed(seed, i, 1).
inline GradientOracle bellman_baseline_oracle(const RolloutOracle& box, EstimatorConfig est, DelayGrid grid,
                                              BellmanConfig bellman, std::uint64_t seed) {
  return [&box, est, grid = std::move(grid), bellman, seed](const Matrix& K, long i) {
    const BellmanDataset data =
        collect_bellman_data(box, K, grid, bellman, derive_seed(seed, static_cast<std::uint64_t>(i), 1));
    const ValueModel model = fit_value_model(data);
    EstimatorConfig cfg = est;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(i), 0);
    const GradientEstimate g = estimate_gradient_vr(box, K, cfg, model);
    return GradientQuery{g.gradient, g.rollouts + g.auxiliary_rollouts + data.rollouts, g.diverged};
  };
}

enum class Termination { StepNorm, IterationCap, NonFinite, Unstable, OracleFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::StepNorm: return "step_norm";
    case Termination::IterationCap: return "iteration_cap";
    case Termination::NonFinite: return "non_finite";
    case Termination::Unstable: return "unstable";
    case Termination::OracleFailure: return "oracle_failure";
  }
  return "unknown";
}

struct IterationRecord {
  long iteration;
  Matrix K;
  double true_cost;  // NaN without a known model
  double grad_norm;
  double step_norm;
  std::optional<bool> hurwitz;
  long samples_cumulative;
  int diverged;
};

struct RunLog {
  std::vector<IterationRecord> records;
  Matrix result;
  double result_cost = std::numeric_limits<double>::quiet_NaN();
  Termination termination = Termination::IterationCap;
  std::string message;
  double final_alpha = 0.0;
  long samples = 0;
};

/// Runs the projected iteration from K0. Returns K_i on the first step with
/// |K_{i+1} - K_i|_F <= epsilon alpha, K_{max_iterations} otherwise.
///
/// `known` is used for logging and the stability guard only; it never feeds the
/// update. Without it, stability is not checked.
inline RunLog pgp_run(const GradientOracle& oracle, const Matrix& K0, const ConstraintSet& omega,
                      const OptimizerConfig& cfg, const SystemParams* known = nullptr) {
  cfg.validate();
  if (!omega.contains(K0)) throw ConfigError("pgp_run: initial gain is not in the constraint set");
  if (known != nullptr && !is_hurwitz(closed_loop(*known, K0))) {
    throw StabilityError("pgp_run: initial gain does not stabilize the plant");
  }
  RunLog log;
  double alpha = cfg.alpha;
  bool halved = false;
  Matrix K = K0;
  long samples = 0;

  auto cost_of = [&](const Matrix& gain) {
    return known != nullptr ? exact_cost(*known, gain) : std::numeric_limits<double>::quiet_NaN();
  };
  auto finish = [&](Termination why, std::string msg) {
    log.result = K;
    log.termination = why;
    log.message = std::move(msg);
    log.final_alpha = alpha;
    log.samples = samples;
    if (known != nullptr && is_hurwitz(closed_loop(*known, K))) log.result_cost = exact_cost(*known, K);
    return log;
  };

  for (long i = 0; i < cfg.max_iterations; ++i) {
    GradientQuery q;
    try {
      q = oracle(K, i);
    } catch (const Error& e) {
      return finish(Termination::OracleFailure, e.what());
    }
    samples += q.samples;
    const double grad_norm = q.gradient.norm();
    if (!q.gradient.allFinite()) {
      return finish(Termination::NonFinite, "gradient estimate has non-finite entries at iteration " +
                                                std::to_string(i) + ", K = " + detail::gain_text(K));
    }
    Matrix next = omega.project(K - alpha * q.gradient);
    if (!next.allFinite()) {
      return finish(Termination::NonFinite, "projected step is not finite at iteration " + std::to_string(i));
    }
    const double step = (next - K).norm();
    IterationRecord rec{i, cfg.record_gains ? K : Matrix(), cost_of(K), grad_norm, step, std::nullopt, samples,
                        q.diverged};
    if (known != nullptr) rec.hurwitz = true;
    log.records.push_back(std::move(rec));
    if (step <= cfg.epsilon * alpha) return finish(Termination::StepNorm, "step norm below epsilon * alpha");

    if (known != nullptr && !is_hurwitz(closed_loop(*known, next))) {
      if (cfg.persist && !halved) {
        halved = true;
        alpha *= 0.5;
        continue;  // retry from K with the smaller step
      }
      std::ostringstream os;
      os << "iterate " << i + 1 << " is not stabilizing (spectral abscissa "
         << spectral_abscissa(closed_loop(*known, next)) << "); K_" << i + 1 << " = " << detail::gain_text(next);
      return finish(Termination::Unstable, os.str());
    }
    K = std::move(next);
  }
  return finish(Termination::IterationCap, "iteration cap reached");
}

struct StationarityCheck {
  bool stationary;
  double mapping_norm;
};

inline StationarityCheck check_stationarity(const SystemParams& sys, const Matrix& K, double alpha,
                                            const ConstraintSet& omega, double epsilon) {
  const double g = gradient_mapping(sys, K, alpha, omega).norm();
  return {g <= epsilon, g};
}

/// 0.9 * 2 (1 - lambda) / L.
inline double recommended_step(const SublevelConstants& c, double lambda) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("recommended_step: lambda must lie in [0, 1)");
  if (!(c.L > 0.0)) throw ConfigError("recommended_step: L must be > 0");
  return 0.9 * 2.0 * (1.0 - lambda) / c.L;
}

/// Smallest integer T with T > f0 / (eps^2 alpha^2 ((1 - lambda) / alpha - L / 2)).
inline long min_iterations(double f0, double epsilon, double alpha, double lambda, double L) {
  const double denom = epsilon * epsilon * alpha * alpha * ((1.0 - lambda) / alpha - 0.5 * L);
  if (!(denom > 0.0)) {
    throw ConfigError("min_iterations: step size too large for the smoothness constant (alpha >= 2 (1 - lambda) / L)");
  }
  const double bound = f0 / denom;
  if (!(bound < 9e18)) throw ConfigError("min_iterations: iteration bound overflows");
  return static_cast<long>(std::floor(bound)) + 1;
}

}  // namespace pgp_lqr
