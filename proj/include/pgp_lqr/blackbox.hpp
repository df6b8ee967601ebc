#pragma once

// The only door model-free code has into a plant. It can reset the state to a
// draw from the initial distribution, run the closed loop under any gain and
// read back costs and outputs; the plant matrices stay private.

#include <utility>

#include "pgp_lqr/system.hpp"

namespace pgp_lqr {

struct BellmanSample {
  Vector y_start;  // ybar(0; x0)
  Vector y_later;  // ybar(s; x0)
  double cost;     // f~_s(K; x0)
};

class RolloutOracle {
 public:
  explicit RolloutOracle(SystemParams sys, SimOptions options = {}) : sys_(std::move(sys)), options_(options) {
    options_.record_outputs = false;
  }

  Index state_dim() const { return sys_.n(); }
  Index input_dim() const { return sys_.m(); }
  Index output_dim() const { return sys_.p(); }
  const SimOptions& options() const { return options_; }

  Vector sample_initial(CounterRng& rng) const { return pgp_lqr::sample_initial(sys_.init, rng); }

  /// f~_tau(K; x0) = int_0^tau y^T (Q + K^T R K) y dt. Throws DivergenceError.
  double rollout_cost(const Matrix& K, const Vector& x0, double tau) const {
    return simulate_cost(sys_, K, x0, tau, options_).cost;
  }

  /// ybar(0; x0): outputs over one window of the grid, starting at x0.
  Vector observe_stacked(const Matrix& K, const Vector& x0, const DelayGrid& grid) const {
    return stacked_observation(sys_, K, x0, 0.0, grid, options_.divergence_bound);
  }

  /// One rollout to s + T returning ybar(0), ybar(s) and the running cost up to s.
  BellmanSample bellman_rollout(const Matrix& K, const Vector& x0, double s, const DelayGrid& grid) const {
    grid.validate();
    const TrajectoryRecord rec = simulate_cost(sys_, K, x0, s, options_);
    const Matrix AK = closed_loop(sys_, K);
    BellmanSample out;
    out.y_start = detail::stack_from_state(sys_, AK, K, x0, grid, options_.divergence_bound, 0.0);
    out.y_later = detail::stack_from_state(sys_, AK, K, rec.final_state, grid, options_.divergence_bound, s);
    out.cost = rec.cost;
    return out;
  }

 private:
  SystemParams sys_;
  SimOptions options_;
};

}  // namespace pgp_lqr
