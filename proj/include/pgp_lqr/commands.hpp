#pragma once

// Subcommands of the pgp-lqr tool. Each one reads an experiment config and a
// master seed and writes CSV tables with JSON sidecars under an output
// directory. Every file carries the config hash and the seed.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "pgp_lqr/checks.hpp"
#include "pgp_lqr/config.hpp"

namespace pgp_lqr::commands {

namespace fs = std::filesystem;
using io::json;

struct Context {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  fs::path out;
  std::string hash;
  std::ostream* log = &std::cout;
};

inline Context make_context(const fs::path& config_path, std::uint64_t seed, const fs::path& out) {
  Context ctx;
  ctx.cfg = load_config(config_path);
  ctx.seed = seed;
  ctx.out = out;
  ctx.hash = io::config_hash(ctx.cfg.raw);
  fs::create_directories(out);
  return ctx;
}

inline json stamp(const Context& ctx, const std::string& command) {
  return json{{"command", command}, {"config_hash", ctx.hash}, {"seed", ctx.seed}, {"config", ctx.cfg.raw}};
}

/// Resolves the plant and writes it next to the results.
inline SystemParams load_plant(const Context& ctx) {
  const SystemParams sys = resolve_system(ctx.cfg, ctx.seed);
  const json gen = ctx.cfg.system_file ? json(nullptr) : generator_json(ctx.cfg, ctx.seed);
  io::write_json_file(ctx.out / "system.json", io::system_to_json(sys, gen));
  return sys;
}

inline double sublevel_value(const Context& ctx, const SystemParams& sys, const Matrix& K0) {
  const double f0 = exact_cost(sys, K0);
  const double a = ctx.cfg.sublevel_a.value_or(f0);
  if (!(a >= f0)) throw ConfigError("config: sublevel_a is below f(K0) = " + io::fmt(f0));
  return a;
}

// ---- gen-system ------------------------------------------------------------

inline int gen_system(const Context& ctx) {
  const SystemParams sys = load_plant(ctx);
  const Matrix K0 = initial_gain(ctx.cfg, sys);
  const Matrix AK0 = closed_loop(sys, K0);
  json side = stamp(ctx, "gen-system");
  side["n"] = sys.n();
  side["m"] = sys.m();
  side["p"] = sys.p();
  side["spectral_abscissa_A"] = spectral_abscissa(sys.A);
  side["spectral_abscissa_AK0"] = spectral_abscissa(AK0);
  side["lambda_max_AK0_sym"] = lambda_max_sym(symmetrize(AK0 + AK0.transpose()));
  side["observability_rank"] = observability_rank(sys.A, sys.C);
  side["f_K0"] = is_hurwitz(AK0) ? json(exact_cost(sys, K0)) : json(nullptr);
  io::write_json_file(ctx.out / "system.meta.json", side);
  *ctx.log << "wrote " << (ctx.out / "system.json").string() << " (n=" << sys.n() << ", m=" << sys.m()
           << ", p=" << sys.p() << ", abscissa(A_K0)=" << spectral_abscissa(AK0) << ")\n";
  return 0;
}

// ---- constants ---------------------------------------------------------------

inline int constants_cmd(const Context& ctx) {
  const SystemParams sys = load_plant(ctx);
  const Matrix K0 = initial_gain(ctx.cfg, sys);
  const double a = sublevel_value(ctx, sys, K0);
  const SublevelConstants c = constants(sys, K0, a);
  const double f0 = exact_cost(sys, K0);
  const OptimizerConfig& opt = ctx.cfg.optimizer;

  json values{{"a", c.a},           {"f_K0", f0},         {"kappa", c.kappa},   {"xi", c.xi},
              {"sigma", c.sigma},   {"X_bound", c.x_bound}, {"Y_bound", c.y_bound}, {"Yp_bound", c.yp_bound},
              {"L", c.L},           {"A_bound", c.a_bound}, {"eta", c.eta},      {"beta", c.beta}};
  json derived;
  derived["alpha_recommended"] = recommended_step(c, opt.lambda);
  derived["tau_for_eta_tau_40"] = 40.0 / c.eta;
  derived["closed_loop_decay"] = -spectral_abscissa(closed_loop(sys, K0));
  try {
    derived["min_delay_count"] = min_delay_count(sys.n(), ctx.cfg.bellman.window, c.beta);
  } catch (const ConfigError& e) {
    derived["min_delay_count"] = e.what();
  }
  try {
    derived["min_iterations"] =
        min_iterations(f0, opt.epsilon, recommended_step(c, opt.lambda), opt.lambda, c.L);
  } catch (const ConfigError& e) {
    derived["min_iterations"] = e.what();
  }
  derived["safe_radius"] =
      safe_radius(sys, K0, a, {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4}, 64, purpose_seed(ctx.seed, SeedPurpose::Study));

  json side = stamp(ctx, "constants");
  side["constants"] = values;
  side["derived"] = derived;
  io::write_json_file(ctx.out / "constants.json", side);

  std::ostringstream txt;
  txt << "# config_hash=" << ctx.hash << "\n# seed=" << ctx.seed << "\n";
  for (const auto& [k, v] : values.items()) txt << k << " = " << v.dump() << "\n";
  for (const auto& [k, v] : derived.items()) txt << k << " = " << v.dump() << "\n";
  io::write_text_file(ctx.out / "constants.txt", txt.str());
  *ctx.log << txt.str();
  return 0;
}

// ---- grad-error --------------------------------------------------------------

inline int grad_error(const Context& ctx) {
  const SystemParams sys = load_plant(ctx);
  const Matrix K0 = initial_gain(ctx.cfg, sys);
  const RolloutOracle box(sys);
  const StudySpec& study = ctx.cfg.study;
  const std::uint64_t seed = purpose_seed(ctx.seed, SeedPurpose::Study);
  const DelayGrid grid = ctx.cfg.bellman.grid();
  const BellmanConfig bc = ctx.cfg.bellman.config(1);

  io::CsvWriter rows(ctx.hash, ctx.seed, {"variant", "N", "r", "tau", "repetition", "rel_error", "diverged"});
  io::CsvWriter summary(ctx.hash, ctx.seed, {"variant", "N", "r", "tau", "median", "q1", "q3", "failures"});
  io::CsvWriter fig(ctx.hash, ctx.seed, {"variant", "repetition", "rel_error"});
  json side = stamp(ctx, "grad-error");
  side["true_gradient_norm"] = exact_gradient(sys, K0).norm();
  side["summary"] = json::array();

  for (const std::string& variant : study.variants) {
    std::vector<StudyRow> result;
    if (variant == "plain") {
      result = error_study(sys, K0, study.cells, study.repetitions, seed, ctx.cfg.workers);
    } else {
      result = error_study(
          sys, K0, study.cells, study.repetitions, seed,
          [&](const Matrix& gain, const EstimatorConfig& cfg) {
            const BellmanDataset data = collect_bellman_data(box, gain, grid, bc, derive_seed(cfg.seed, 1));
            return estimate_gradient_vr(box, gain, cfg, fit_value_model(data));
          },
          ctx.cfg.workers);
    }
    for (const StudyRow& r : result) {
      rows.row(variant, r.N, r.r, r.tau, r.repetition, r.rel_error, r.diverged);
      if (r.N == study.cells.front().N && r.r == study.cells.front().r && r.tau == study.cells.front().tau) {
        fig.row(variant, r.repetition, r.rel_error);
      }
    }
    for (const CellSummary& s : summarize(result)) {
      summary.row(variant, s.cell.N, s.cell.r, s.cell.tau, s.median, s.q1, s.q3, s.failures);
      side["summary"].push_back(json{{"variant", variant},
                                     {"N", s.cell.N},
                                     {"r", s.cell.r},
                                     {"tau", s.cell.tau},
                                     {"median", s.median},
                                     {"q1", s.q1},
                                     {"q3", s.q3},
                                     {"failures", s.failures}});
      *ctx.log << variant << " N=" << s.cell.N << " r=" << s.cell.r << " tau=" << s.cell.tau
               << ": median relative error " << s.median << " [" << s.q1 << ", " << s.q3 << "]\n";
    }
  }
  io::write_text_file(ctx.out / "grad_error.csv", rows.str());
  io::write_text_file(ctx.out / "grad_error_summary.csv", summary.str());
  io::write_text_file(ctx.out / "fig1.csv", fig.str());
  io::write_json_file(ctx.out / "grad_error.json", side);
  return 0;
}

// ---- train -------------------------------------------------------------------

inline int train(const Context& ctx) {
  const SystemParams sys = load_plant(ctx);
  const Matrix K0 = initial_gain(ctx.cfg, sys);
  const ConstraintSet omega = ctx.cfg.constraint();
  const RolloutOracle box(sys);
  OptimizerConfig opt = ctx.cfg.optimizer;
  opt.seed = purpose_seed(ctx.seed, SeedPurpose::Train);

  GradientOracle oracle;
  if (ctx.cfg.gradient == "exact") {
    oracle = exact_gradient_oracle(sys);
  } else if (opt.baseline == BaselineKind::Bellman) {
    oracle = bellman_baseline_oracle(box, opt.estimator, ctx.cfg.bellman.grid(), ctx.cfg.bellman.config(ctx.cfg.workers),
                                     opt.seed);
  } else {
    oracle = zeroth_order_oracle(box, opt.estimator, opt.seed);
  }
  const RunLog log = pgp_run(oracle, K0, omega, opt, &sys);

  std::vector<std::string> cols{"iter", "f_true", "grad_est_norm", "step_norm", "hurwitz", "samples_cumulative",
                                "diverged"};
  for (Index i = 0; i < sys.m(); ++i)
    for (Index j = 0; j < sys.p(); ++j) cols.push_back("K_" + std::to_string(i) + "_" + std::to_string(j));
  io::CsvWriter table(ctx.hash, ctx.seed, cols);
  io::CsvWriter fig(ctx.hash, ctx.seed, {"iter", "f_true", "window_median"});
  std::vector<double> costs;
  bool all_hurwitz = log.termination != Termination::Unstable;
  bool all_feasible = omega.contains(log.result);
  for (const IterationRecord& rec : log.records) {
    std::ostringstream line;
    line << rec.iteration << "," << io::fmt(rec.true_cost) << "," << io::fmt(rec.grad_norm) << ","
         << io::fmt(rec.step_norm) << "," << (rec.hurwitz.value_or(false) ? 1 : 0) << "," << rec.samples_cumulative
         << "," << rec.diverged;
    for (Index i = 0; i < rec.K.rows(); ++i)
      for (Index j = 0; j < rec.K.cols(); ++j) line << "," << io::fmt(rec.K(i, j));
    table.row(line.str());
    costs.push_back(rec.true_cost);
    const std::size_t lo = costs.size() > 50 ? costs.size() - 50 : 0;
    fig.row(rec.iteration, rec.true_cost, median(std::vector<double>(costs.begin() + static_cast<long>(lo), costs.end())));
    if (!rec.hurwitz.value_or(false)) all_hurwitz = false;
    if (!omega.contains(rec.K)) all_feasible = false;
  }
  const std::vector<double> thirds = checks::third_medians(costs);

  json side = stamp(ctx, "train");
  side["termination"] = to_string(log.termination);
  side["message"] = log.message;
  side["iterations"] = log.records.size();
  side["f_K0"] = exact_cost(sys, K0);
  side["final_gain"] = io::matrix_to_json(log.result);
  side["final_cost"] = std::isfinite(log.result_cost) ? json(log.result_cost) : json(nullptr);
  side["final_alpha"] = log.final_alpha;
  side["samples"] = log.samples;
  side["window_medians"] = thirds;
  side["trend_decreasing"] = checks::strictly_decreasing(thirds);
  side["all_hurwitz"] = all_hurwitz;
  side["all_feasible"] = all_feasible;
  io::write_text_file(ctx.out / "train.csv", table.str());
  io::write_text_file(ctx.out / "fig2.csv", fig.str());
  io::write_json_file(ctx.out / "train.json", side);
  *ctx.log << "train: " << log.records.size() << " iterations, termination " << to_string(log.termination)
           << ", f(K0) = " << exact_cost(sys, K0) << ", final f = " << log.result_cost << "\n";
  return 0;
}

// ---- validate ----------------------------------------------------------------

inline int validate(const Context& ctx) {
  const checks::Profile profile =
      ctx.cfg.validate_profile == "full" ? checks::Profile::Full : checks::Profile::Quick;
  const auto results = checks::run_profile(ctx.seed, profile, [&](const checks::CheckResult& r) {
    *ctx.log << checks::format_line(r) << std::endl;
  });
  io::CsvWriter table(ctx.hash, ctx.seed, {"id", "title", "passed", "seconds", "detail"});
  json side = stamp(ctx, "validate");
  side["profile"] = ctx.cfg.validate_profile;
  side["checks"] = json::array();
  int failed = 0;
  for (const checks::CheckResult& r : results) {
    std::string detail = r.detail;
    for (char& ch : detail)
      if (ch == '"') ch = '\'';
    table.row(r.id, "\"" + r.title + "\"", r.passed ? 1 : 0, r.seconds, "\"" + detail + "\"");
    side["checks"].push_back(
        json{{"id", r.id}, {"title", r.title}, {"passed", r.passed}, {"seconds", r.seconds}, {"detail", r.detail}});
    failed += r.passed ? 0 : 1;
  }
  side["failed"] = failed;
  io::write_text_file(ctx.out / "validate.csv", table.str());
  io::write_json_file(ctx.out / "validate.json", side);
  *ctx.log << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace pgp_lqr::commands
