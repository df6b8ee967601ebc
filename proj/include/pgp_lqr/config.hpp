#pragma once

// Experiment configuration: a JSON document with optional sections
//
//   system      { "file": path } or { "generator": { kind, n, m, p, seed } }
//   constraint  { "kind": "full" | "pattern" | "psd", "mask": [[...]] }
//   initial_gain, sublevel_a
//   estimator   { N, r, tau, cost_ceiling }
//   bellman     { s, window, delays, samples }
//   optimizer   { alpha, epsilon, max_iterations, lambda, baseline, gradient, persist }
//   study       { cells: [{N, r, tau}], repetitions, variants }
//   validate    { profile }
//   workers
//
// Unknown keys are rejected so that typos surface as errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pgp_lqr/constraint.hpp"
#include "pgp_lqr/io.hpp"
#include "pgp_lqr/optimize.hpp"

namespace pgp_lqr {

/// Stream ids for seeds derived from the master seed.
enum class SeedPurpose : std::uint64_t { Study = 1, Train = 2, Validate = 3, BellmanStudy = 4 };

inline std::uint64_t purpose_seed(std::uint64_t master, SeedPurpose purpose) {
  return derive_seed(master, static_cast<std::uint64_t>(purpose));
}

struct GeneratorSpec {
  std::string kind = "phl";  // "phl" or "dissipative"
  Index n = 10, m = 4, p = 2;
  std::optional<std::uint64_t> seed;  // falls back to the master seed
  GeneratorScales scales;
};

struct BellmanSpec {
  double s = 1.0;
  double window = 0.1;
  Index delays = 20;
  Index samples = 0;  // 0 means n(n+1)/2

  DelayGrid grid() const { return DelayGrid::uniform(delays, window); }
  BellmanConfig config(unsigned workers) const {
    BellmanConfig c;
    c.s = s;
    c.samples = samples;
    c.workers = workers;
    return c;
  }
};

struct StudySpec {
  std::vector<StudyCell> cells{StudyCell{2, 1e-3, 100.0}};
  int repetitions = 200;
  std::vector<std::string> variants{"plain", "baseline"};
};

struct ExperimentConfig {
  io::json raw = io::json::object();
  std::optional<std::filesystem::path> system_file;
  GeneratorSpec generator;
  std::string constraint_kind = "full";
  Matrix mask;
  std::optional<Matrix> initial_gain;
  std::optional<double> sublevel_a;
  EstimatorConfig estimator{2, 1e-3, 100.0};
  BellmanSpec bellman;
  OptimizerConfig optimizer;
  std::string gradient = "zeroth";  // "zeroth" or "exact"
  StudySpec study;
  std::string validate_profile = "quick";
  unsigned workers = 1;

  ConstraintSet constraint() const {
    if (constraint_kind == "pattern") return ConstraintSet::pattern(mask);
    if (constraint_kind == "psd") return ConstraintSet::psd();
    return ConstraintSet::full();
  }
};

namespace detail {

inline void check_keys(const io::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ParseError("config: section '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ParseError("config: unknown field '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <typename T>
T get_field(const io::json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const io::json::exception&) {
    throw ParseError("config: field '" + where + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

/// Parses a config document. Relative system paths resolve against `base_dir`.
inline ExperimentConfig parse_config(const io::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_field;
  ExperimentConfig cfg;
  cfg.raw = j;
  detail::check_keys(j, "", {"system", "constraint", "initial_gain", "sublevel_a", "estimator", "bellman", "optimizer",
                             "study", "validate", "workers"});
  cfg.workers = get_field<unsigned>(j, "workers", "", 1u);
  if (cfg.workers < 1) cfg.workers = 1;

  if (j.contains("system")) {
    const io::json& s = j.at("system");
    detail::check_keys(s, "system", {"file", "generator"});
    if (s.contains("file") && s.contains("generator")) throw ParseError("config: give either system.file or system.generator");
    if (s.contains("file")) {
      std::filesystem::path p = get_field<std::string>(s, "file", "system", "");
      cfg.system_file = p.is_relative() ? base_dir / p : p;
    }
    if (s.contains("generator")) {
      const io::json& g = s.at("generator");
      detail::check_keys(g, "system.generator",
                         {"kind", "n", "m", "p", "seed", "b_offset", "b_spread", "c_offset", "c_spread"});
      GeneratorSpec& gen = cfg.generator;
      gen.kind = get_field<std::string>(g, "kind", "system.generator", gen.kind);
      if (gen.kind != "phl" && gen.kind != "dissipative") throw ParseError("config: field 'system.generator.kind' must be phl or dissipative");
      gen.n = get_field<Index>(g, "n", "system.generator", gen.n);
      gen.m = get_field<Index>(g, "m", "system.generator", gen.m);
      gen.p = get_field<Index>(g, "p", "system.generator", gen.p);
      if (g.contains("seed")) gen.seed = get_field<std::uint64_t>(g, "seed", "system.generator", 0);
      gen.scales.b_offset = get_field<double>(g, "b_offset", "system.generator", gen.scales.b_offset);
      gen.scales.b_spread = get_field<double>(g, "b_spread", "system.generator", gen.scales.b_spread);
      gen.scales.c_offset = get_field<double>(g, "c_offset", "system.generator", gen.scales.c_offset);
      gen.scales.c_spread = get_field<double>(g, "c_spread", "system.generator", gen.scales.c_spread);
    }
  }

  if (j.contains("constraint")) {
    const io::json& c = j.at("constraint");
    detail::check_keys(c, "constraint", {"kind", "mask"});
    cfg.constraint_kind = get_field<std::string>(c, "kind", "constraint", "full");
    if (cfg.constraint_kind == "pattern") {
      cfg.mask = io::matrix_from_json(io::require(c, "mask", "config section 'constraint'"), "constraint.mask");
      try {
        (void)ConstraintSet::pattern(cfg.mask);
      } catch (const ConfigError& e) {
        throw ParseError(std::string("config: field 'constraint.mask': ") + e.what());
      }
    } else if (cfg.constraint_kind != "full" && cfg.constraint_kind != "psd") {
      throw ParseError("config: field 'constraint.kind' must be full, pattern or psd");
    }
  }

  if (j.contains("initial_gain")) cfg.initial_gain = io::matrix_from_json(j.at("initial_gain"), "initial_gain");
  if (j.contains("sublevel_a")) cfg.sublevel_a = io::number_field(j.at("sublevel_a"), "config: field 'sublevel_a'");

  if (j.contains("estimator")) {
    const io::json& e = j.at("estimator");
    detail::check_keys(e, "estimator", {"N", "r", "tau", "cost_ceiling"});
    cfg.estimator.N = get_field<int>(e, "N", "estimator", cfg.estimator.N);
    cfg.estimator.r = get_field<double>(e, "r", "estimator", cfg.estimator.r);
    cfg.estimator.tau = get_field<double>(e, "tau", "estimator", cfg.estimator.tau);
    cfg.estimator.cost_ceiling = get_field<double>(e, "cost_ceiling", "estimator", cfg.estimator.cost_ceiling);
    try {
      cfg.estimator.validate();
    } catch (const ConfigError& err) {
      throw ParseError(std::string("config: ") + err.what());
    }
  }
  cfg.estimator.workers = cfg.workers;

  if (j.contains("bellman")) {
    const io::json& b = j.at("bellman");
    detail::check_keys(b, "bellman", {"s", "window", "delays", "samples"});
    cfg.bellman.s = get_field<double>(b, "s", "bellman", cfg.bellman.s);
    cfg.bellman.window = get_field<double>(b, "window", "bellman", cfg.bellman.window);
    cfg.bellman.delays = get_field<Index>(b, "delays", "bellman", cfg.bellman.delays);
    cfg.bellman.samples = get_field<Index>(b, "samples", "bellman", cfg.bellman.samples);
    if (!(cfg.bellman.s > 0.0)) throw ParseError("config: field 'bellman.s' must be > 0");
    if (!(cfg.bellman.window > 0.0)) throw ParseError("config: field 'bellman.window' must be > 0");
    if (cfg.bellman.delays < 2) throw ParseError("config: field 'bellman.delays' must be >= 2");
  }

  if (j.contains("optimizer")) {
    const io::json& o = j.at("optimizer");
    detail::check_keys(o, "optimizer",
                       {"alpha", "epsilon", "max_iterations", "lambda", "baseline", "gradient", "persist"});
    OptimizerConfig& opt = cfg.optimizer;
    opt.alpha = get_field<double>(o, "alpha", "optimizer", opt.alpha);
    opt.epsilon = get_field<double>(o, "epsilon", "optimizer", opt.epsilon);
    opt.max_iterations = get_field<long>(o, "max_iterations", "optimizer", opt.max_iterations);
    opt.lambda = get_field<double>(o, "lambda", "optimizer", opt.lambda);
    opt.persist = get_field<bool>(o, "persist", "optimizer", opt.persist);
    const std::string baseline = get_field<std::string>(o, "baseline", "optimizer", "none");
    if (baseline == "bellman") {
      opt.baseline = BaselineKind::Bellman;
    } else if (baseline == "none") {
      opt.baseline = BaselineKind::None;
    } else {
      throw ParseError("config: field 'optimizer.baseline' must be none or bellman");
    }
    cfg.gradient = get_field<std::string>(o, "gradient", "optimizer", cfg.gradient);
    if (cfg.gradient != "zeroth" && cfg.gradient != "exact") throw ParseError("config: field 'optimizer.gradient' must be zeroth or exact");
    try {
      opt.validate();
    } catch (const ConfigError& err) {
      throw ParseError(std::string("config: ") + err.what());
    }
  }
  cfg.optimizer.estimator = cfg.estimator;

  if (j.contains("study")) {
    const io::json& s = j.at("study");
    detail::check_keys(s, "study", {"cells", "repetitions", "variants"});
    cfg.study.repetitions = get_field<int>(s, "repetitions", "study", cfg.study.repetitions);
    if (cfg.study.repetitions < 1) throw ParseError("config: field 'study.repetitions' must be >= 1");
    if (s.contains("cells")) {
      cfg.study.cells.clear();
      for (const io::json& cell : s.at("cells")) {
        detail::check_keys(cell, "study.cells[]", {"N", "r", "tau"});
        StudyCell c;
        c.N = get_field<int>(cell, "N", "study.cells[]", cfg.estimator.N);
        c.r = get_field<double>(cell, "r", "study.cells[]", cfg.estimator.r);
        c.tau = get_field<double>(cell, "tau", "study.cells[]", cfg.estimator.tau);
        if (c.N < 1 || !(c.r > 0.0) || !(c.tau > 0.0)) throw ParseError("config: study cell needs N >= 1, r > 0, tau > 0");
        cfg.study.cells.push_back(c);
      }
    }
    if (s.contains("variants")) {
      cfg.study.variants = get_field<std::vector<std::string>>(s, "variants", "study", {});
      for (const std::string& v : cfg.study.variants) {
        if (v != "plain" && v != "baseline") throw ParseError("config: field 'study.variants' accepts plain and baseline");
      }
    }
  }

  if (j.contains("validate")) {
    const io::json& v = j.at("validate");
    detail::check_keys(v, "validate", {"profile"});
    cfg.validate_profile = get_field<std::string>(v, "profile", "validate", cfg.validate_profile);
    if (cfg.validate_profile != "quick" && cfg.validate_profile != "full") {
      throw ParseError("config: field 'validate.profile' must be quick or full");
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_json_file(path), path.parent_path());
}

/// The plant named by the config: read from file or generated with the
/// generator seed (master seed when the config does not pin one).
inline SystemParams resolve_system(const ExperimentConfig& cfg, std::uint64_t master_seed) {
  if (cfg.system_file) return io::read_system(*cfg.system_file);
  const GeneratorSpec& g = cfg.generator;
  const std::uint64_t seed = g.seed.value_or(master_seed);
  CounterRng rng(seed);
  SystemParams sys = g.kind == "dissipative" ? random_dissipative_system(g.n, g.m, g.p, rng)
                                             : random_phl_system(g.n, g.m, g.p, rng, g.scales);
  sys.generator_seed = seed;
  return sys;
}

inline io::json generator_json(const ExperimentConfig& cfg, std::uint64_t master_seed) {
  const GeneratorSpec& g = cfg.generator;
  io::json j{{"kind", g.kind},
             {"n", g.n},
             {"m", g.m},
             {"p", g.p},
             {"seed", g.seed.value_or(master_seed)},
             {"rng", "splitmix64 counter stream; output i = mix64(key + (i+1) * 0x9E3779B97F4A7C15), "
                     "key = mix64(mix64(seed) + stream * 0xD1B54A32D192ED03); uniform = (u >> 11) * 2^-53; "
                     "normal = sqrt(-2 ln(1 - u1)) cos(2 pi u2); matrices filled row-major"}};
  if (g.kind == "phl") {
    j["draw_order"] = "Jt, Gt, Ht normals (n x n each), B uniforms (n x m), C uniforms (p x n)";
    j["b_offset"] = g.scales.b_offset;
    j["b_spread"] = g.scales.b_spread;
    j["c_offset"] = g.scales.c_offset;
    j["c_spread"] = g.scales.c_spread;
  } else {
    j["draw_order"] = "Jt, Gt normals (n x n each), B normals (n x m), C normals (p x n)";
  }
  return j;
}

inline Matrix initial_gain(const ExperimentConfig& cfg, const SystemParams& sys) {
  if (!cfg.initial_gain) return Matrix::Zero(sys.m(), sys.p());
  if (cfg.initial_gain->rows() != sys.m() || cfg.initial_gain->cols() != sys.p()) {
    throw ConfigError("config: initial_gain must be m x p = " + std::to_string(sys.m()) + " x " +
                      std::to_string(sys.p()));
  }
  return *cfg.initial_gain;
}

}  // namespace pgp_lqr
