#pragma once

// JSON serialization of plants, value models and experiment configs, CSV
// helpers, and the config hash stamped into every output file.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "pgp_lqr/baseline.hpp"
#include "pgp_lqr/system.hpp"

namespace pgp_lqr::io {

using json = nlohmann::json;

inline constexpr const char* kSystemFormat = "pgp-lqr-system";
inline constexpr const char* kValueModelFormat = "pgp-lqr-value-model";
inline constexpr int kFormatVersion = 1;

/// Rows as arrays. Doubles are written in shortest round-trip form.
inline json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline double number_field(const json& j, const std::string& where) {
  if (!j.is_number()) throw ParseError(where + ": expected a number");
  return j.get<double>();
}

inline Matrix matrix_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "': expected an array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (rows == 0) throw ParseError("field '" + field + "': empty matrix");
  if (!j[0].is_array()) throw ParseError("field '" + field + "': row 0 is not an array");
  const auto cols = static_cast<Index>(j[0].size());
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError("field '" + field + "': row " + std::to_string(i) + " does not have " + std::to_string(cols) +
                       " entries");
    }
    for (Index c = 0; c < cols; ++c) {
      M(i, c) = number_field(row[static_cast<std::size_t>(c)],
                             "field '" + field + "' entry (" + std::to_string(i) + ", " + std::to_string(c) + ")");
    }
  }
  return M;
}

inline Vector vector_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError("field '" + field + "': expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Index>(i)) = number_field(j[i], "field '" + field + "' entry " + std::to_string(i));
  }
  return v;
}

inline const json& require(const json& j, const std::string& key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(context + ": missing field '" + key + "'");
  return j.at(key);
}

// ---- files -----------------------------------------------------------------

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---- plants ----------------------------------------------------------------

/// System file: dimensions, A, B, C, Q, R, the initial distribution and,
/// optionally, how the plant was generated.
inline json system_to_json(const SystemParams& sys, const json& generator = nullptr) {
  json j;
  j["format"] = kSystemFormat;
  j["version"] = kFormatVersion;
  j["n"] = sys.n();
  j["m"] = sys.m();
  j["p"] = sys.p();
  j["A"] = matrix_to_json(sys.A);
  j["B"] = matrix_to_json(sys.B);
  j["C"] = matrix_to_json(sys.C);
  j["Q"] = matrix_to_json(sys.Q);
  j["R"] = matrix_to_json(sys.R);
  json init;
  init["kind"] = to_string(sys.init.kind);
  switch (sys.init.kind) {
    case InitialKind::UniformCube: break;
    case InitialKind::ScaledCube: init["transform"] = matrix_to_json(sys.init.transform); break;
    case InitialKind::Custom: throw UsageError("system_to_json: custom initial distributions cannot be serialized");
  }
  j["initial"] = init;
  if (!generator.is_null()) j["generator"] = generator;
  return j;
}

inline SystemParams system_from_json(const json& j) {
  const std::string ctx = "system file";
  if (!j.is_object()) throw ParseError(ctx + ": expected a JSON object");
  if (j.contains("format") && j.at("format") != kSystemFormat) throw ParseError(ctx + ": field 'format' is not " + std::string(kSystemFormat));
  SystemParams sys;
  sys.A = matrix_from_json(require(j, "A", ctx), "A");
  sys.B = matrix_from_json(require(j, "B", ctx), "B");
  sys.C = matrix_from_json(require(j, "C", ctx), "C");
  sys.Q = j.contains("Q") ? matrix_from_json(j.at("Q"), "Q") : Matrix::Identity(sys.C.rows(), sys.C.rows());
  sys.R = j.contains("R") ? matrix_from_json(j.at("R"), "R") : Matrix::Identity(sys.B.cols(), sys.B.cols());
  for (const char* dim : {"n", "m", "p"}) {
    if (!j.contains(dim)) continue;
    if (!j.at(dim).is_number_integer()) throw ParseError(ctx + ": field '" + dim + "' must be an integer");
  }
  if (j.contains("n") && j.at("n").get<Index>() != sys.A.rows()) throw ParseError(ctx + ": field 'n' disagrees with A");
  if (j.contains("m") && j.at("m").get<Index>() != sys.B.cols()) throw ParseError(ctx + ": field 'm' disagrees with B");
  if (j.contains("p") && j.at("p").get<Index>() != sys.C.rows()) throw ParseError(ctx + ": field 'p' disagrees with C");
  const json init = j.contains("initial") ? j.at("initial") : json{{"kind", "uniform_cube"}};
  const std::string kind = require(init, "kind", ctx + " field 'initial'").get<std::string>();
  if (kind == "uniform_cube") {
    sys.init = InitialDistribution::uniform_cube(sys.A.rows());
  } else if (kind == "scaled_cube") {
    sys.init = InitialDistribution::scaled_cube(
        matrix_from_json(require(init, "transform", ctx + " field 'initial'"), "initial.transform"));
  } else {
    throw ParseError(ctx + ": field 'initial.kind' has unknown value '" + kind + "'");
  }
  if (j.contains("generator") && j.at("generator").contains("seed")) {
    sys.generator_seed = j.at("generator").at("seed").get<std::uint64_t>();
  }
  try {
    validate(sys);
  } catch (const ConfigError& e) {
    throw ParseError(ctx + ": " + e.what());
  }
  return sys;
}

inline SystemParams read_system(const std::filesystem::path& path) {
  try {
    return system_from_json(read_json_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

// ---- value models ----------------------------------------------------------

inline json value_model_to_json(const ValueModel& model) {
  json j;
  j["format"] = kValueModelFormat;
  j["version"] = kFormatVersion;
  j["delays"] = model.grid.delays;
  j["s"] = model.s;
  j["gain"] = matrix_to_json(model.gain);
  j["P_sym_vec"] = vector_to_json(sym_vec(model.P));
  j["fit_residual"] = model.fit_residual;
  j["rank"] = model.rank;
  j["samples"] = model.samples;
  return j;
}

inline ValueModel value_model_from_json(const json& j) {
  const std::string ctx = "value model";
  ValueModel model;
  const Vector delays = vector_from_json(require(j, "delays", ctx), "delays");
  model.grid.delays.assign(delays.data(), delays.data() + delays.size());
  try {
    model.grid.validate();
  } catch (const ConfigError& e) {
    throw ParseError(ctx + ": field 'delays': " + e.what());
  }
  model.s = number_field(require(j, "s", ctx), "field 's'");
  model.gain = matrix_from_json(require(j, "gain", ctx), "gain");
  model.P = sym_unvec(vector_from_json(require(j, "P_sym_vec", ctx), "P_sym_vec"));
  model.fit_residual = number_field(require(j, "fit_residual", ctx), "field 'fit_residual'");
  model.rank = require(j, "rank", ctx).get<Index>();
  model.samples = require(j, "samples", ctx).get<Index>();
  if (model.P.rows() % model.grid.count() != 0) throw ParseError(ctx + ": P size is not a multiple of the delay count");
  return model;
}

// ---- hashing and CSV -------------------------------------------------------

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Hash of the canonical (key-sorted, compact) dump of a config.
inline std::string config_hash(const json& config) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config.dump());
  return os.str();
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return json(v).dump();
}

/// CSV with a provenance preamble of '#' comment lines.
class CsvWriter {
 public:
  CsvWriter(const std::string& hash, std::uint64_t seed, const std::vector<std::string>& columns) {
    os_ << "# config_hash=" << hash << "\n# seed=" << seed << "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << "\n";
  }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
    os_ << "\n";
  }

  std::string str() const { return os_.str(); }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  std::ostringstream os_;
};

}  // namespace pgp_lqr::io
