#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "pgp_lqr/config.hpp"
#include "pgp_lqr/io.hpp"

using namespace pgp_lqr;
using io::json;

TEST(SystemJson, RoundTripIsBitExact) {
  CounterRng rng(1);
  const SystemParams s = random_phl_system(5, 2, 2, rng);
  const SystemParams back = io::system_from_json(json::parse(io::system_to_json(s).dump()));
  EXPECT_EQ(back.A, s.A);
  EXPECT_EQ(back.B, s.B);
  EXPECT_EQ(back.C, s.C);
  EXPECT_EQ(back.init.transform, s.init.transform);
  EXPECT_EQ(back.init.kind, InitialKind::ScaledCube);
}

TEST(SystemJson, ErrorsNameTheField) {
  json j = io::system_to_json(random_dissipative_system(2, 1, 1, *std::make_unique<CounterRng>(2)));
  j["B"] = json::array({json::array({1.0}), json::array({"x"})});
  try {
    io::system_from_json(j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("'B'"), std::string::npos) << e.what();
  }
  j.erase("B");
  EXPECT_THROW(io::system_from_json(j), ParseError);
  json k = io::system_to_json(random_dissipative_system(2, 1, 1, *std::make_unique<CounterRng>(2)));
  k["n"] = 3;
  EXPECT_THROW(io::system_from_json(k), ParseError);
}

TEST(ValueModelJson, RoundTrip) {
  ValueModel m;
  m.P = Matrix::Identity(4, 4);
  m.P(1, 2) = m.P(2, 1) = 0.25;
  m.grid = DelayGrid::uniform(2, 0.5);
  m.s = 1.0;
  m.gain = Matrix::Zero(1, 2);
  m.rank = 3;
  m.samples = 3;
  const ValueModel back = io::value_model_from_json(json::parse(io::value_model_to_json(m).dump()));
  EXPECT_LE((back.P - m.P).norm(), 1e-15);
  EXPECT_EQ(back.grid.delays, m.grid.delays);
  json bad = io::value_model_to_json(m);
  bad["delays"] = json::array({0.0, 0.5, 0.2});
  EXPECT_THROW(io::value_model_from_json(bad), ParseError);
}

TEST(Config, DefaultsAndSections) {
  const json j = json::parse(R"({
    "system": {"generator": {"kind": "phl", "n": 10, "m": 4, "p": 2, "seed": 3}},
    "constraint": {"kind": "pattern", "mask": [[1,0],[1,0],[0,1],[0,1]]},
    "estimator": {"N": 2, "r": 0.001, "tau": 100},
    "optimizer": {"alpha": 1e-4, "max_iterations": 10, "baseline": "bellman"},
    "bellman": {"window": 0.1, "delays": 20}
  })");
  const ExperimentConfig cfg = parse_config(j);
  EXPECT_EQ(cfg.generator.seed.value(), 3u);
  EXPECT_EQ(cfg.optimizer.baseline, BaselineKind::Bellman);
  EXPECT_EQ(cfg.optimizer.estimator.N, 2);
  EXPECT_EQ(cfg.constraint().kind(), ConstraintSet::Kind::Pattern);
  const SystemParams s = resolve_system(cfg, 999);
  EXPECT_EQ(s.n(), 10);
  EXPECT_EQ(s.generator_seed.value(), 3u);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(json::parse(R"({"estimatr": {}})")), ParseError);
  EXPECT_THROW(parse_config(json::parse(R"({"estimator": {"N": "two"}})")), ParseError);
  EXPECT_THROW(parse_config(json::parse(R"({"estimator": {"r": -1}})")), ParseError);
  EXPECT_THROW(parse_config(json::parse(R"({"optimizer": {"baseline": "value"}})")), ParseError);
  EXPECT_THROW(parse_config(json::parse(R"({"constraint": {"kind": "pattern", "mask": [[2]]}})")), ParseError);
  EXPECT_THROW(parse_config(json::parse(R"({"system": {"file": "a", "generator": {}}})")), ParseError);
}

TEST(Config, InitialGainShapeChecked) {
  const ExperimentConfig cfg = parse_config(json::parse(R"({"initial_gain": [[0.1, 0.2]]})"));
  CounterRng rng(1);
  const SystemParams s = random_dissipative_system(3, 1, 2, rng);
  EXPECT_EQ(initial_gain(cfg, s).cols(), 2);
  const SystemParams t = random_dissipative_system(3, 2, 2, rng);
  EXPECT_THROW(initial_gain(cfg, t), ConfigError);
}

TEST(Hash, StableAndKeyOrderInsensitive) {
  const json a = json::parse(R"({"x": 1, "y": [1, 2]})");
  const json b = json::parse(R"({"y": [1, 2], "x": 1})");
  EXPECT_EQ(io::config_hash(a), io::config_hash(b));
  EXPECT_EQ(io::config_hash(a).size(), 16u);
  EXPECT_NE(io::config_hash(a), io::config_hash(json::parse(R"({"x": 2, "y": [1, 2]})")));
  EXPECT_EQ(io::fnv1a(""), 0xCBF29CE484222325ULL);
  EXPECT_EQ(io::fnv1a("a"), 0xAF63DC4C8601EC8CULL);
}

TEST(Csv, PreambleAndRows) {
  io::CsvWriter w("abc", 7, {"a", "b", "c"});
  w.row(1, 0.5, std::string("x"));
  EXPECT_EQ(w.str(), "# config_hash=abc\n# seed=7\na,b,c\n1,0.5,x\n");
  EXPECT_EQ(io::fmt(0.1), "0.1");
  EXPECT_EQ(io::fmt(std::numeric_limits<double>::quiet_NaN()), "nan");
}
