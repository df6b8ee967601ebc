#pragma once

// Property and reproduction checks shared by `pgp-lqr validate` and the
// acceptance runner. Every check is seeded and returns a verdict with the
// measured quantities behind it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pgp_lqr/analytic.hpp"
#include "pgp_lqr/baseline.hpp"
#include "pgp_lqr/optimize.hpp"
#include "pgp_lqr/zeroth.hpp"

namespace pgp_lqr::checks {

struct CheckResult {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs `body`, timing it and turning library errors into a failed verdict.
inline CheckResult timed(const std::string& id, const std::string& title,
                         const std::function<bool(std::ostringstream&)>& body) {
  CheckResult res;
  res.id = id;
  res.title = title;
  std::ostringstream detail;
  detail.precision(4);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    res.passed = body(detail);
  } catch (const std::exception& e) {
    detail << " error: " << e.what();
    res.passed = false;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.detail = detail.str();
  return res;
}

inline std::string format_line(const CheckResult& r) {
  std::ostringstream os;
  os << (r.passed ? "[PASS] " : "[FAIL] ") << r.id << " " << r.title << ": " << r.detail << " (" << std::fixed;
  os.precision(1);
  os << r.seconds << " s)";
  return os.str();
}

// ---- sampling helpers ------------------------------------------------------

inline Matrix normal_matrix(Index rows, Index cols, CounterRng& rng) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = rng.normal();
  return M;
}

/// Random Hurwitz matrix: M / sqrt(n) shifted left past its spectral abscissa.
inline Matrix random_hurwitz(Index n, CounterRng& rng) {
  const Matrix M = normal_matrix(n, n, rng) / std::sqrt(static_cast<double>(n));
  const double shift = spectral_abscissa(M) + 0.1 + 0.9 * rng.uniform();
  return M - shift * Matrix::Identity(n, n);
}

/// Gain K0 + t D in S(a): D is a random unit direction and t is uniform on the
/// part of the ray inside S(a) found by doubling and bisection.
inline Matrix sample_sublevel(const SystemParams& sys, const Matrix& K0, double a, CounterRng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Matrix D = normal_matrix(sys.m(), sys.p(), rng);
    D /= D.norm();
    double lo = 0.0, hi = 1e-3;
    while (hi < 1e4 && in_sublevel(sys, K0 + hi * D, a)) {
      lo = hi;
      hi *= 2.0;
    }
    for (int k = 0; k < 50; ++k) {
      const double mid = 0.5 * (lo + hi);
      (in_sublevel(sys, K0 + mid * D, a) ? lo : hi) = mid;
    }
    const double t = lo * std::sqrt(rng.uniform());
    const Matrix K = K0 + t * D;
    if (in_sublevel(sys, K, a)) return K;
  }
  return K0;
}

inline double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

// ---- the checks ------------------------------------------------------------

/// Lyapunov residuals |A^T X + X A + W|_F <= 1e-10 (1 + |W|_F) on random
/// Hurwitz A, n in {2..12}; the primal equation is checked alongside.
inline CheckResult lyapunov_residuals(std::uint64_t seed, int systems = 100) {
  return timed("1", "Lyapunov residuals", [&](std::ostringstream& d) {
    CounterRng rng(seed);
    double worst = 0.0;
    for (int k = 0; k < systems; ++k) {
      const Index n = 2 + k % 11;
      const Matrix A = random_hurwitz(n, rng);
      const Matrix G = normal_matrix(n, n, rng);
      const Matrix W = symmetrize(G * G.transpose());
      const Matrix X = solve_lyap_dual(A, W);
      const Matrix Y = solve_lyap_primal(A, W);
      const double scale = 1.0 + W.norm();
      worst = std::max(worst, (A.transpose() * X + X * A + W).norm() / scale);
      worst = std::max(worst, (A * Y + Y * A.transpose() + W).norm() / scale);
    }
    d << "max residual / (1 + |W|_F) = " << worst << " over " << systems << " systems";
    return worst <= 1e-10;
  });
}

/// exact_gradient against central differences of exact_cost, plus the scalar
/// closed form f'(0) = -1/2.
inline CheckResult gradient_oracle(std::uint64_t seed, int cases = 50) {
  return timed("2", "Gradient oracle", [&](std::ostringstream& d) {
    CounterRng rng(seed);
    double worst = 0.0;
    for (int k = 0; k < cases; ++k) {
      const Index n = 2 + k % 5, m = 1 + k % 3, p = 1 + (k / 3) % std::min<Index>(3, n);
      SystemParams sys = random_dissipative_system(n, m, p, rng);
      Matrix K;
      do {
        K = 0.3 * normal_matrix(m, p, rng);
      } while (!is_hurwitz(closed_loop(sys, K)));
      const Matrix g = exact_gradient(sys, K);
      Matrix fd(m, p);
      const double h = 1e-5;
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < p; ++j) {
          Matrix E = Matrix::Zero(m, p);
          E(i, j) = h;
          fd(i, j) = (exact_cost(sys, K + E) - exact_cost(sys, K - E)) / (2.0 * h);
        }
      worst = std::max(worst, (g - fd).norm() / std::max(g.norm(), 1e-300));
    }
    SystemParams scalar;
    scalar.A = Matrix::Constant(1, 1, -1.0);
    scalar.B = scalar.C = scalar.Q = scalar.R = Matrix::Identity(1, 1);
    scalar.init = InitialDistribution::custom(nullptr, Matrix::Identity(1, 1), 1.0);
    const double f_prime = exact_gradient(scalar, Matrix::Zero(1, 1))(0, 0);
    d << "max relative FD error " << worst << " over " << cases << " cases; scalar f'(0) = " << f_prime;
    return worst <= 1e-5 && std::abs(f_prime + 0.5) <= 1e-10;
  });
}

/// |K|_2 <= kappa, |X|_2 <= X_bound, |Y|_2 <= Y_bound, |Y'|_2 <= Y'_bound on
/// samples from S(a), a = 2 f(K0), for random n = 10, m = 4, p = 2 plants.
inline CheckResult sublevel_bounds(std::uint64_t seed, int systems = 5, int samples = 100) {
  return timed("3", "Sublevel norm bounds", [&](std::ostringstream& d) {
    long violations = 0, total = 0;
    double worst_ratio = 0.0;
    for (int s = 0; s < systems; ++s) {
      CounterRng gen(derive_seed(seed, 0, static_cast<std::uint64_t>(s)));
      const SystemParams sys = random_phl_system(10, 4, 2, gen);
      const Matrix K0 = Matrix::Zero(4, 2);
      const double a = 2.0 * exact_cost(sys, K0);
      const SublevelConstants c = constants(sys, K0, a);
      CounterRng rng(derive_seed(seed, 1, static_cast<std::uint64_t>(s)));
      for (int k = 0; k < samples; ++k) {
        const Matrix K = sample_sublevel(sys, K0, a, rng);
        const LyapunovPair ly = lyapunov_pair(sys, K);
        Matrix E = normal_matrix(4, 2, rng);
        E /= E.norm();
        const Matrix Yp = y_prime(sys, K, E);
        const double ratios[] = {norm2(K) / c.kappa, norm2(ly.X) / c.x_bound, norm2(ly.Y) / c.y_bound,
                                 norm2(Yp) / c.yp_bound};
        for (const double r : ratios) {
          worst_ratio = std::max(worst_ratio, r);
          if (!(r <= 1.0)) ++violations;
        }
        ++total;
      }
    }
    d << violations << " violations over " << total << " gains; largest measured/bound ratio " << worst_ratio;
    return violations == 0;
  });
}

/// |grad f(K1) - grad f(K2)|_F <= L |K1 - K2|_F on pairs within S(a).
inline CheckResult smoothness_witness(std::uint64_t seed, int systems = 5, int pairs = 100) {
  return timed("4", "Smoothness witness", [&](std::ostringstream& d) {
    long violations = 0, total = 0;
    double worst_ratio = 0.0;
    for (int s = 0; s < systems; ++s) {
      CounterRng gen(derive_seed(seed, 0, static_cast<std::uint64_t>(s)));
      const SystemParams sys = random_phl_system(10, 4, 2, gen);
      const Matrix K0 = Matrix::Zero(4, 2);
      const double a = 2.0 * exact_cost(sys, K0);
      const SublevelConstants c = constants(sys, K0, a);
      CounterRng rng(derive_seed(seed, 2, static_cast<std::uint64_t>(s)));
      for (int k = 0; k < pairs; ++k) {
        const Matrix K1 = sample_sublevel(sys, K0, a, rng);
        Matrix K2 = sample_sublevel(sys, K0, a, rng);
        if (k % 2 == 1) {  // nearby pair
          Matrix D = normal_matrix(4, 2, rng);
          K2 = K1 + 1e-4 * D / D.norm();
          if (!in_sublevel(sys, K2, a)) K2 = K1 + 0.5 * (K2 - K1);
          if (!in_sublevel(sys, K2, a)) continue;
        }
        const double dk = (K1 - K2).norm();
        if (!(dk > 0.0)) continue;
        const double ratio = (exact_gradient(sys, K1) - exact_gradient(sys, K2)).norm() / (c.L * dk);
        worst_ratio = std::max(worst_ratio, ratio);
        if (!(ratio <= 1.0)) ++violations;
        ++total;
      }
    }
    d << violations << " violations over " << total << " pairs; largest |dgrad| / (L |dK|) = " << worst_ratio;
    return violations == 0;
  });
}

struct RateStudy {
  int reps = 60;
  std::vector<int> sample_counts{4, 16, 64, 256};
  int truncation_draws = 4000;
  int bias_draws = 20000;
};

/// Test plant for the estimator-rate checks: n = 4, m = p = 2.
inline SystemParams rate_study_system(std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, 5));
  return random_dissipative_system(4, 2, 2, rng);
}

/// Variance leg: slope of median relative error against N on a log-log scale.
inline CheckResult estimator_variance_rate(std::uint64_t seed, const RateStudy& st = {}) {
  return timed("5i", "Estimator variance rate", [&](std::ostringstream& d) {
    const SystemParams sys = rate_study_system(seed);
    const Matrix K = Matrix::Zero(sys.m(), sys.p());
    const double decay = -spectral_abscissa(closed_loop(sys, K));
    const double tau = 20.0 / decay;  // e^{-2 decay tau} = e^{-40}
    const Matrix truth = exact_gradient(sys, K);
    const RolloutOracle box(sys);
    std::vector<double> Ns, medians;
    for (std::size_t c = 0; c < st.sample_counts.size(); ++c) {
      std::vector<double> errs;
      for (int k = 0; k < st.reps; ++k) {
        EstimatorConfig cfg{st.sample_counts[c], 1e-3, tau, derive_seed(seed, 10 + c, static_cast<std::uint64_t>(k))};
        errs.push_back((estimate_gradient(box, K, cfg).gradient - truth).norm() / truth.norm());
      }
      Ns.push_back(st.sample_counts[c]);
      medians.push_back(median(errs));
    }
    const double slope = log_log_slope(Ns, medians);
    d << "medians";
    for (std::size_t i = 0; i < Ns.size(); ++i) d << " N=" << Ns[i] << ":" << medians[i];
    d << "; slope " << slope << " (target -0.5 +- 0.15)";
    return std::abs(slope + 0.5) <= 0.15;
  });
}

/// Truncation leg: the expected truncation contribution
///   E_U[(f - f_tau)(K + rU) U] / r
/// (x(0) integrated exactly, U by antithetic Monte Carlo) must decay at least
/// like e^{-eta tau} until it reaches round-off, and once it is below 1e-3 of
/// |grad f|, doubling tau must move the estimator's median error (under common
/// random numbers) by less than its standard error.
inline CheckResult estimator_truncation_rate(std::uint64_t seed, const RateStudy& st = {}) {
  return timed("5ii", "Estimator truncation rate", [&](std::ostringstream& d) {
    const SystemParams sys = rate_study_system(seed);
    const Matrix K = Matrix::Zero(sys.m(), sys.p());
    const double decay = -spectral_abscissa(closed_loop(sys, K));
    const double f0 = exact_cost(sys, K);
    const SublevelConstants c = constants(sys, K, 2.0 * f0);
    const Matrix truth = exact_gradient(sys, K);
    const double r = 1e-3;
    const double tau_long = 20.0 / decay;
    std::vector<double> taus;
    for (int j = 7; j >= 0; --j) taus.push_back(tau_long / std::pow(2.0, j));

    CounterRng rng(derive_seed(seed, 20));
    std::vector<Matrix> U;
    for (int i = 0; i < st.truncation_draws; ++i) U.push_back(sample_sphere(sys.m(), sys.p(), rng));
    std::vector<double> trunc;
    for (const double tau : taus) {
      Matrix acc = Matrix::Zero(sys.m(), sys.p());
      for (const Matrix& u : U) {
        const double hp = exact_cost(sys, K + r * u) - truncated_cost(sys, K + r * u, tau);
        const double hm = exact_cost(sys, K - r * u) - truncated_cost(sys, K - r * u, tau);
        acc += (hp - hm) / (2.0 * r) * u;
      }
      trunc.push_back((acc / static_cast<double>(U.size())).norm() / truth.norm());
    }

    // Exponential decay down to the round-off plateau.
    const double plateau = 1e-9;
    bool monotone = true;
    std::vector<double> fit_tau, fit_val;
    for (std::size_t i = 0; i < taus.size(); ++i) {
      if (trunc[i] <= plateau) break;
      if (i > 0 && !(trunc[i] < trunc[i - 1])) monotone = false;
      fit_tau.push_back(taus[i]);
      fit_val.push_back(std::log(trunc[i]));
    }
    double rate = 0.0;
    if (fit_tau.size() >= 2) {
      double mt = 0.0, mv = 0.0;
      for (std::size_t i = 0; i < fit_tau.size(); ++i) {
        mt += fit_tau[i];
        mv += fit_val[i];
      }
      mt /= static_cast<double>(fit_tau.size());
      mv /= static_cast<double>(fit_tau.size());
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < fit_tau.size(); ++i) {
        sxy += (fit_tau[i] - mt) * (fit_val[i] - mv);
        sxx += (fit_tau[i] - mt) * (fit_tau[i] - mt);
      }
      rate = -sxy / sxx;
    }

    // Rollout estimator under common random numbers across tau.
    const RolloutOracle box(sys);
    const int N = 64;
    std::vector<double> med;
    std::vector<std::vector<double>> errs(taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) {
      for (int k = 0; k < st.reps; ++k) {
        EstimatorConfig cfg{N, r, taus[t], derive_seed(seed, 21, static_cast<std::uint64_t>(k))};
        errs[t].push_back((estimate_gradient(box, K, cfg).gradient - truth).norm() / truth.norm());
      }
      med.push_back(median(errs[t]));
    }
    // Noise band: standard error of the median, 1.2533 sd / sqrt(reps) with sd from the IQR.
    const double spread = quantile(errs.back(), 0.75) - quantile(errs.back(), 0.25);
    const double band = 1.2533 * (spread / 1.349) / std::sqrt(static_cast<double>(st.reps));
    bool saturated = true;
    int negligible = 0;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (!(trunc[t] <= 1e-3)) continue;
      ++negligible;
      if (t + 1 < taus.size() && !(std::abs(med[t + 1] - med[t]) < band)) saturated = false;
    }
    d << "truncation term";
    for (std::size_t i = 0; i < taus.size(); ++i) d << " tau=" << taus[i] << ":" << trunc[i];
    d << "; fitted decay rate " << rate << " (eta = " << c.eta << ", closed-loop 2|abscissa| = " << 2.0 * decay
      << "); estimator medians";
    for (std::size_t i = 0; i < taus.size(); ++i) d << " " << med[i];
    d << "; noise band " << band << " over " << negligible << " horizons with negligible truncation";
    return monotone && fit_tau.size() >= 2 && rate >= c.eta && saturated && negligible >= 2;
  });
}

/// Smoothing leg: the bias |grad g_r - grad f| of the sphere-smoothed gradient,
/// isolated exactly in x(0) and tau and estimated over U with antithetic pairs
/// and the control variate <grad f, U> U (mean grad f), should shrink by a
/// factor in [5, 20] when r drops from 1e-2 to 1e-3.
inline CheckResult estimator_smoothing_rate(std::uint64_t seed, const RateStudy& st = {}) {
  return timed("5iii", "Estimator smoothing bias rate", [&](std::ostringstream& d) {
    const SystemParams sys = rate_study_system(seed);
    const Matrix K = Matrix::Zero(sys.m(), sys.p());
    const Matrix truth = exact_gradient(sys, K);
    const std::vector<double> radii{1e-1, 1e-2, 1e-3};
    CounterRng rng(derive_seed(seed, 30));
    std::vector<Matrix> U;
    for (int i = 0; i < st.bias_draws; ++i) U.push_back(sample_sphere(sys.m(), sys.p(), rng));
    std::vector<double> bias, stderr_rel;
    for (const double r : radii) {
      Matrix mean = Matrix::Zero(sys.m(), sys.p());
      std::vector<Matrix> terms;
      terms.reserve(U.size());
      for (const Matrix& u : U) {
        const double central = (exact_cost(sys, K + r * u) - exact_cost(sys, K - r * u)) / (2.0 * r);
        terms.push_back((central - (truth.array() * u.array()).sum()) * u);
        mean += terms.back();
      }
      mean /= static_cast<double>(U.size());
      double var = 0.0;
      for (const Matrix& t : terms) var += (t - mean).squaredNorm();
      var /= static_cast<double>(U.size() - 1);
      bias.push_back(mean.norm() / truth.norm());
      stderr_rel.push_back(std::sqrt(var / static_cast<double>(U.size())) / truth.norm());
    }
    const double factor_hi = bias[0] / bias[1];
    const double factor_lo = bias[1] / bias[2];
    d << "relative bias";
    for (std::size_t i = 0; i < radii.size(); ++i) d << " r=" << radii[i] << ":" << bias[i] << "(se " << stderr_rel[i] << ")";
    d << "; shrink factor 1e-2 -> 1e-3: " << factor_lo << " (target [5, 20]); 1e-1 -> 1e-2: " << factor_hi
      << "; log-log slope " << log_log_slope(radii, bias);
    return factor_lo >= 5.0 && factor_lo <= 20.0;
  });
}

/// Window T giving T beta / (2 pi) = 2, so D = 2(n - 1) + 3.
inline double identification_window(double beta) { return 4.0 * std::numbers::pi / beta; }

/// Value identification: f^ = f~ to 1e-6 relative on fresh initial states,
/// with D >= min_delay_count and F of full column rank.
inline CheckResult value_identification(std::uint64_t seed, int per_dim = 3, int fresh = 100) {
  return timed("6", "Value identification", [&](std::ostringstream& d) {
    double worst = 0.0, worst_sv = std::numeric_limits<double>::infinity();
    int systems = 0;
    bool ok = true;
    for (Index n = 2; n <= 4; ++n) {
      for (int s = 0; s < per_dim; ++s) {
        CounterRng gen(derive_seed(seed, 40 + static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(s)));
        const Index p = 1 + s % 2;
        const SystemParams sys = random_dissipative_system(n, 1, p, gen);
        const Matrix K = Matrix::Zero(1, p);
        const SublevelConstants c = constants(sys, K, 2.0 * exact_cost(sys, K));
        const double T = identification_window(c.beta);
        const Index D = min_delay_count(n, T, c.beta);
        const DelayGrid grid = DelayGrid::uniform(D, T);
        Matrix F = reconstruction_matrix(sys, K, grid);
        for (Index j = 0; j < F.cols(); ++j) F.col(j) /= F.col(j).norm();
        Eigen::JacobiSVD<Matrix> svd(F);
        const double smin = svd.singularValues()(svd.singularValues().size() - 1);
        worst_sv = std::min(worst_sv, smin);
        if (!(smin > 1e-8)) ok = false;

        const RolloutOracle box(sys);
        // Regressors are quadratic in ybar, so their conditioning is roughly cond(F)^2.
        BellmanConfig bc;
        bc.rank_tol = 1e-14;
        const BellmanDataset data = collect_bellman_data(box, K, grid, bc, derive_seed(seed, 50, systems));
        const ValueModel model = fit_value_model(data, 1e-15);
        CounterRng fresh_rng(derive_seed(seed, 51, systems));
        for (int i = 0; i < fresh; ++i) {
          const Vector x0 = box.sample_initial(fresh_rng);
          const double truth = exact_value(sys, K, x0);
          const double est = value_estimate(model, box.observe_stacked(K, x0, grid));
          worst = std::max(worst, std::abs(est - truth) / truth);
        }
        ++systems;
      }
    }
    d << systems << " systems (n = 2..4), max relative value error " << worst
      << ", smallest column-scaled singular value of F " << worst_sv;
    return ok && worst <= 1e-6;
  });
}

/// Reference plant for the gradient-error and training reproductions: n = 10, m = 4, p = 2.
inline SystemParams reference_system(std::uint64_t generator_seed) {
  CounterRng rng(generator_seed);
  return random_phl_system(10, 4, 2, rng);
}

inline Matrix reference_mask() {
  Matrix S(4, 2);
  S << 1, 0, 1, 0, 0, 1, 0, 1;
  return S;
}

struct ReferenceSetup {
  std::uint64_t generator_seed = 3;
  EstimatorConfig estimator{2, 1e-3, 100.0};
  double bellman_s = 1.0;
  double window = 0.1;
  Index delays = 20;
};

/// Baseline optimality and unbiasedness on paired seeds: the plain, constant
/// (dataset-mean) and value-model baselines share U_i, x_i(0) and c_i.
inline CheckResult baseline_optimality(std::uint64_t seed, const ReferenceSetup& ref = {}, int pairs = 200) {
  return timed("7", "Baseline unbiasedness and variance ordering", [&](std::ostringstream& d) {
    const SystemParams sys = reference_system(ref.generator_seed);
    const Matrix K = Matrix::Zero(sys.m(), sys.p());
    const RolloutOracle box(sys);
    const DelayGrid grid = DelayGrid::uniform(ref.delays, ref.window);
    BellmanConfig bc;
    bc.s = ref.bellman_s;
    const BellmanDataset data = collect_bellman_data(box, K, grid, bc, derive_seed(seed, 60));
    const ValueModel model = fit_value_model(data);
    const double b_const = dataset_mean_baseline(model, data);
    std::vector<Matrix> plain, vr, cst;
    for (int k = 0; k < pairs; ++k) {
      EstimatorConfig cfg = ref.estimator;
      cfg.seed = derive_seed(seed, 61, static_cast<std::uint64_t>(k));
      cfg.retain_samples = true;
      const GradientEstimate e = estimate_gradient_vr(box, K, cfg, model);
      Matrix gp = Matrix::Zero(sys.m(), sys.p()), gv = gp, gc = gp;
      for (std::size_t i = 0; i < e.costs.size(); ++i) {
        gp += e.costs[i] * e.perturbations[i];
        gv += (e.costs[i] - e.baselines[i]) * e.perturbations[i];
        gc += (e.costs[i] - b_const) * e.perturbations[i];
      }
      const double scale = 1.0 / (cfg.r * static_cast<double>(cfg.N));
      plain.push_back(gp * scale);
      vr.push_back(gv * scale);
      cst.push_back(gc * scale);
    }
    auto mean_of = [](const std::vector<Matrix>& xs) {
      Matrix m = Matrix::Zero(xs[0].rows(), xs[0].cols());
      for (const Matrix& x : xs) m += x;
      return Matrix(m / static_cast<double>(xs.size()));
    };
    auto trace_var = [&](const std::vector<Matrix>& xs) {
      const Matrix m = mean_of(xs);
      double v = 0.0;
      for (const Matrix& x : xs) v += (x - m).squaredNorm();
      return v / static_cast<double>(xs.size() - 1);
    };
    std::vector<Matrix> diff;
    for (int k = 0; k < pairs; ++k) diff.push_back(plain[static_cast<std::size_t>(k)] - vr[static_cast<std::size_t>(k)]);
    const double mean_gap = mean_of(diff).norm();
    const double se = std::sqrt(trace_var(diff) / pairs);
    const double v_vr = trace_var(vr), v_const = trace_var(cst), v_plain = trace_var(plain);
    d << "|mean(plain - baseline)|_F = " << mean_gap << " vs 3 SE = " << 3.0 * se << "; trace variances f^: " << v_vr
      << " <= dataset-mean: " << v_const << " <= zero: " << v_plain << " over " << pairs << " paired seeds";
    return mean_gap <= 3.0 * se && v_vr <= v_const && v_const <= v_plain;
  });
}

/// Relative gradient error with and without the value-model baseline at the
/// reference settings; the baseline median must be at most half the plain one.
inline CheckResult gradient_error_reproduction(std::uint64_t seed, const ReferenceSetup& ref = {}, int reps = 200) {
  return timed("8", "Gradient-error reproduction", [&](std::ostringstream& d) {
    const SystemParams sys = reference_system(ref.generator_seed);
    const Matrix K = Matrix::Zero(sys.m(), sys.p());
    const RolloutOracle box(sys);
    const DelayGrid grid = DelayGrid::uniform(ref.delays, ref.window);
    BellmanConfig bc;
    bc.s = ref.bellman_s;
    const std::vector<StudyCell> cells{{ref.estimator.N, ref.estimator.r, ref.estimator.tau}};
    const auto plain = error_study(sys, K, cells, reps, derive_seed(seed, 70));
    const auto with_baseline = error_study(
        sys, K, cells, reps, derive_seed(seed, 70), [&](const Matrix& gain, const EstimatorConfig& cfg) {
          const BellmanDataset data = collect_bellman_data(box, gain, grid, bc, derive_seed(cfg.seed, 1));
          return estimate_gradient_vr(box, gain, cfg, fit_value_model(data));
        });
    const CellSummary sp = summarize(plain).front();
    const CellSummary sb = summarize(with_baseline).front();
    d << "median relative error plain " << sp.median << " [" << sp.q1 << ", " << sp.q3 << "], baseline " << sb.median
      << " [" << sb.q1 << ", " << sb.q3 << "], ratio " << sb.median / sp.median << " (target <= 0.5), " << reps
      << " repetitions";
    return sp.failures == 0 && sb.failures == 0 && sb.median <= 0.5 * sp.median;
  });
}

/// Medians of f over the first window and the last window of each third.
inline std::vector<double> third_medians(const std::vector<double>& costs, std::size_t window = 50) {
  std::vector<double> out;
  if (costs.size() < 3 * window) return out;
  out.push_back(median(std::vector<double>(costs.begin(), costs.begin() + static_cast<long>(window))));
  for (int k = 1; k <= 3; ++k) {
    const std::size_t end = costs.size() * static_cast<std::size_t>(k) / 3;
    out.push_back(median(std::vector<double>(costs.begin() + static_cast<long>(end - window),
                                             costs.begin() + static_cast<long>(end))));
  }
  return out;
}

inline bool strictly_decreasing(const std::vector<double>& v) {
  if (v.size() < 2) return false;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

struct TrainingOutcome {
  RunLog log;
  std::vector<double> costs;
  std::vector<double> thirds;
  bool all_hurwitz = true;
  bool all_feasible = true;
};

inline TrainingOutcome reference_training(std::uint64_t seed, const ReferenceSetup& ref, BaselineKind baseline,
                                          long iterations, double alpha = 1e-4) {
  const SystemParams sys = reference_system(ref.generator_seed);
  const ConstraintSet omega = ConstraintSet::pattern(reference_mask());
  const RolloutOracle box(sys);
  OptimizerConfig cfg;
  cfg.alpha = alpha;
  cfg.epsilon = 1e-12;
  cfg.max_iterations = iterations;
  cfg.estimator = ref.estimator;
  cfg.baseline = baseline;
  BellmanConfig bc;
  bc.s = ref.bellman_s;
  const std::uint64_t run_seed = derive_seed(seed, 80);
  const GradientOracle oracle =
      baseline == BaselineKind::Bellman
          ? bellman_baseline_oracle(box, ref.estimator, DelayGrid::uniform(ref.delays, ref.window), bc, run_seed)
          : zeroth_order_oracle(box, ref.estimator, run_seed);
  TrainingOutcome out;
  out.log = pgp_run(oracle, Matrix::Zero(sys.m(), sys.p()), omega, cfg, &sys);
  for (const IterationRecord& rec : out.log.records) {
    out.costs.push_back(rec.true_cost);
    if (!rec.hurwitz.value_or(false)) out.all_hurwitz = false;
    if (!omega.contains(rec.K)) out.all_feasible = false;
  }
  if (!omega.contains(out.log.result)) out.all_feasible = false;
  if (out.log.termination == Termination::Unstable) out.all_hurwitz = false;
  out.thirds = third_medians(out.costs);
  return out;
}

/// Training with the value-model baseline: windowed medians strictly decrease
/// across thirds, every iterate is stabilizing and meets the pattern exactly.
/// The no-baseline run is reported for information only.
inline CheckResult training_reproduction(std::uint64_t seed, const ReferenceSetup& ref = {}, long iterations = 2000,
                                         bool report_plain = true) {
  return timed("9", "Training reproduction", [&](std::ostringstream& d) {
    const TrainingOutcome vr = reference_training(seed, ref, BaselineKind::Bellman, iterations);
    d << "with baseline: " << vr.log.records.size() << " iterations, termination " << to_string(vr.log.termination)
      << ", window medians";
    for (const double m : vr.thirds) d << " " << m;
    d << ", all Hurwitz " << (vr.all_hurwitz ? "yes" : "no") << ", pattern exact " << (vr.all_feasible ? "yes" : "no");
    const bool pass = vr.log.termination == Termination::IterationCap &&
                      static_cast<long>(vr.log.records.size()) == iterations && strictly_decreasing(vr.thirds) &&
                      vr.all_hurwitz && vr.all_feasible;
    if (report_plain) {
      const TrainingOutcome plain = reference_training(seed, ref, BaselineKind::None, iterations);
      const bool converging = plain.log.termination == Termination::IterationCap && strictly_decreasing(plain.thirds);
      d << "; without baseline (informational): termination " << to_string(plain.log.termination) << " after "
        << plain.log.records.size() << " iterations, " << (converging ? "converging" : "non-converging");
    }
    return pass;
  });
}

/// Model-based projected gradient with alpha = 0.9 * 2 / L (L on S(f(K0))):
/// strict descent at every step, step-norm termination, and a final
/// gradient-mapping norm <= epsilon. Plants are scalar (n = m = p = 1) with
/// the constraint k >= 0; L grows so fast with n that larger plants need
/// 1e7 or more steps at 2 / L.
inline CheckResult model_based_descent(std::uint64_t seed, int systems = 20, long max_iterations = 5'000'000) {
  return timed("10", "Model-based descent and stationarity", [&](std::ostringstream& d) {
    int descent_ok = 0, terminated = 0, stationary = 0;
    long most_iterations = 0;
    double worst_mapping_ratio = 0.0;
    const ConstraintSet omega = ConstraintSet::psd();
    for (int s = 0; s < systems; ++s) {
      CounterRng gen(derive_seed(seed, 90, static_cast<std::uint64_t>(s)));
      const SystemParams sys = random_dissipative_system(1, 1, 1, gen);
      Matrix K0 = Matrix::Constant(1, 1, 0.1);
      if (!is_hurwitz(closed_loop(sys, K0))) K0(0, 0) = 0.0;
      const double f0 = exact_cost(sys, K0);
      const SublevelConstants c = constants(sys, K0, f0);
      OptimizerConfig cfg;
      cfg.lambda = 0.0;
      cfg.record_gains = false;
      cfg.alpha = recommended_step(c, 0.0);
      const double g0 = gradient_mapping(sys, K0, cfg.alpha, omega).norm();
      cfg.epsilon = 0.1 * std::max(g0, 1e-12);
      cfg.max_iterations = std::min(max_iterations, min_iterations(f0, cfg.epsilon, cfg.alpha, 0.0, c.L));
      const RunLog log = pgp_run(exact_gradient_oracle(sys), K0, omega, cfg, &sys);
      bool descent = true;
      for (std::size_t i = 1; i < log.records.size(); ++i)
        if (!(log.records[i].true_cost < log.records[i - 1].true_cost)) descent = false;
      descent_ok += descent;
      const bool by_step = log.termination == Termination::StepNorm;
      terminated += by_step;
      const double mapping = check_stationarity(sys, log.result, cfg.alpha, omega, cfg.epsilon).mapping_norm;
      worst_mapping_ratio = std::max(worst_mapping_ratio, mapping / cfg.epsilon);
      stationary += mapping <= cfg.epsilon;
      most_iterations = std::max<long>(most_iterations, static_cast<long>(log.records.size()));
    }
    d << systems << " plants: strict descent " << descent_ok << ", step-norm termination " << terminated
      << ", |G_alpha| <= eps " << stationary << "; largest |G_alpha| / eps " << worst_mapping_ratio
      << ", most iterations " << most_iterations;
    return descent_ok == systems && terminated == systems && stationary == systems;
  });
}

/// Projection axioms: exact idempotence, nonexpansiveness and the obtuse-angle
/// inequality <x - proj(y), y - proj(y)> <= 0 for x in the set.
inline CheckResult projection_axioms(std::uint64_t seed, int pairs = 10000) {
  return timed("11", "Projection axioms", [&](std::ostringstream& d) {
    CounterRng rng(seed);
    Matrix mask(3, 2);
    mask << 1, 0, 0, 1, 1, 1;
    struct Variant {
      const char* name;
      ConstraintSet set;
      Index m, p;
    };
    const Variant variants[] = {{"full", ConstraintSet::full(), 3, 2},
                                {"pattern", ConstraintSet::pattern(mask), 3, 2},
                                {"psd", ConstraintSet::psd(), 3, 3}};
    const double slack = 1e-12;
    bool ok = true;
    for (const Variant& v : variants) {
      long idem = 0, expand = 0, angle = 0;
      double worst_angle = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < pairs; ++k) {
        const Matrix Y1 = normal_matrix(v.m, v.p, rng);
        const Matrix Y2 = normal_matrix(v.m, v.p, rng);
        Matrix x = normal_matrix(v.m, v.p, rng);
        if (v.set.kind() == ConstraintSet::Kind::Psd) x = symmetrize(x * x.transpose());
        x = v.set.project(x);
        const Matrix P1 = v.set.project(Y1);
        const Matrix P2 = v.set.project(Y2);
        if (v.set.project(P1) != P1) ++idem;
        if ((P1 - P2).norm() > (Y1 - Y2).norm() + slack) ++expand;
        const double inner = ((x - P1).array() * (Y1 - P1).array()).sum();
        worst_angle = std::max(worst_angle, inner);
        if (inner > slack) ++angle;
      }
      d << v.name << ": idempotence failures " << idem << ", expansions " << expand << ", angle violations " << angle
        << " (max inner " << worst_angle << "); ";
      ok = ok && idem == 0 && expand == 0 && angle == 0;
    }
    d << pairs << " pairs per variant";
    return ok;
  });
}

enum class Profile { Quick, Full };

/// Check i runs with derive_seed(master, 100, i). The quick profile skips the
/// long reference-plant runs and shrinks the rest.
inline std::vector<CheckResult> run_profile(std::uint64_t master, Profile profile,
                                            const std::function<void(const CheckResult&)>& on_result = {}) {
  const bool full = profile == Profile::Full;
  auto seed = [master](std::uint64_t i) { return derive_seed(master, 100, i); };
  std::vector<std::function<CheckResult()>> jobs;
  jobs.push_back([&] { return lyapunov_residuals(seed(1), full ? 100 : 30); });
  jobs.push_back([&] { return gradient_oracle(seed(2), full ? 50 : 20); });
  jobs.push_back([&] { return sublevel_bounds(seed(3), 5, full ? 100 : 20); });
  jobs.push_back([&] { return smoothness_witness(seed(4), 5, full ? 100 : 20); });
  if (full) {
    jobs.push_back([&] { return estimator_variance_rate(seed(5)); });
    jobs.push_back([&] { return estimator_truncation_rate(seed(5)); });
    jobs.push_back([&] { return estimator_smoothing_rate(seed(5)); });
  }
  jobs.push_back([&] { return value_identification(seed(6), full ? 3 : 1, 100); });
  jobs.push_back([&] { return baseline_optimality(seed(7), {}, full ? 200 : 50); });
  if (full) {
    jobs.push_back([&] { return gradient_error_reproduction(seed(8)); });
    jobs.push_back([&] { return training_reproduction(seed(9)); });
  }
  jobs.push_back([&] { return model_based_descent(seed(10), full ? 20 : 5, full ? 5'000'000 : 200'000); });
  jobs.push_back([&] { return projection_axioms(seed(11), full ? 10000 : 2000); });

  std::vector<CheckResult> out;
  for (const auto& job : jobs) {
    out.push_back(job());
    if (on_result) on_result(out.back());
  }
  return out;
}

}  // namespace pgp_lqr::checks
