#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "surropt/config.hpp"
#include "surropt/io.hpp"
#include "support.hpp"

using namespace surropt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("surropt-io-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

bool same_bits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST(Jsonl, RecordsRoundTripBitExact) {
  const auto dir = scratch("roundtrip");
  RandomStream rng(1, "io");
  std::vector<EvaluationRecord> recs;
  {
    io::JsonlWriter w(dir / "log.jsonl");
    for (int i = 0; i < 500; ++i) {
      EvaluationRecord r{{rng.uniform(-1e3, 1e3), std::ldexp(rng.uniform(), -300), rng.normal()},
                         {rng.normal() * 1e-7, i % 37 == 0 ? std::nan("") : rng.uniform()},
                         {static_cast<std::uint8_t>(rng.coin()), 1},
                         static_cast<std::size_t>(i / 50),
                         static_cast<Provenance>(i % 4)};
      w.write(io::to_json(r));
      recs.push_back(r);
    }
  }
  const auto back = io::read_evaluations(dir / "log.jsonl");
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(back[i].epoch, recs[i].epoch);
    EXPECT_EQ(back[i].provenance, recs[i].provenance);
    EXPECT_EQ(back[i].constraints, recs[i].constraints);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_TRUE(same_bits(back[i].params[j], recs[i].params[j]));
    for (std::size_t j = 0; j < 2; ++j) EXPECT_TRUE(same_bits(back[i].objectives[j], recs[i].objectives[j]));
  }
}

TEST(Jsonl, TruncationIsDetected) {
  const auto dir = scratch("trunc");
  const std::string good = io::to_json(EvaluationRecord{{0.5}, {1.0}, {1}, 0, Provenance::init}).dump();
  {
    std::ofstream(dir / "a.jsonl") << good << '\n' << good;
    std::ofstream(dir / "b.jsonl") << good << '\n' << good.substr(0, good.size() / 2);
    std::ofstream(dir / "c.jsonl") << good << '\n' << "{oops}\n" << good << '\n';
    std::ofstream(dir / "d.jsonl") << good << '\n' << good << '\n';
  }
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    try {
      (void)io::read_jsonl(dir / name);
      FAIL() << name;
    } catch (const io::LogError& e) {
      EXPECT_EQ(e.line(), 2u);
      EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
    }
  }
  try {
    (void)io::read_jsonl(dir / "c.jsonl");
    FAIL();
  } catch (const io::LogError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("malformed"), std::string::npos);
  }
  EXPECT_EQ(io::read_jsonl(dir / "d.jsonl").size(), 2u);
}

TEST(Metrics, CsvRoundTripAndRecompute) {
  const auto dir = scratch("metrics");
  RunConfig c;
  c.problem = "tnk";
  c.initial_samples = 20;
  c.evaluations_per_epoch = c.population_size = 10;
  c.epochs = 3;
  c.generations = 3;
  c.surrogate.block_dim = 8;
  c.surrogate.max_epochs = 30;
  const auto h = run(c);
  io::write_metrics_csv(dir / "m.csv", h.metrics());
  const auto back = io::read_metrics_csv(dir / "m.csv");
  ASSERT_EQ(back.size(), h.metrics().size());
  const auto again = io::recompute_metrics(h.records());
  ASSERT_EQ(again.size(), back.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].mode, h.metrics()[i].mode);
    EXPECT_TRUE(same_bits(back[i].nrmse, h.metrics()[i].nrmse));
    EXPECT_EQ(back[i].epoch, again[i].epoch);
    EXPECT_EQ(back[i].cumulative_evals, again[i].cumulative_evals);
    EXPECT_EQ(back[i].feasible_count, again[i].feasible_count);
    EXPECT_TRUE(same_bits(back[i].hv_norm, again[i].hv_norm));
  }
}

TEST(Numbers, FormatParse) {
  for (double v : {0.1, -2.5e-300, 1e300, 3.0, std::nan(""), HUGE_VAL, -HUGE_VAL})
    EXPECT_TRUE(same_bits(io::parse_double(io::format_double(v)), v));
  EXPECT_THROW((void)io::parse_double("1.5x"), std::invalid_argument);
}

TEST(Checkpoint, RoundTripPredictsIdentically) {
  const auto dir = scratch("ckpt");
  const auto f = surropt::testing::random_model(3, 3, 2, 2);
  io::write_checkpoint(dir / "m.json", f);
  const auto g = io::read_checkpoint(dir / "m.json");
  const std::vector<Point> X{{0.1, 2.0, -0.5}, {1.0, 1.0, 1.0}};
  const auto a = f.predict(X), b = g.predict(X);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_EQ(a.C, b.C);
  EXPECT_EQ(g.mode(), f.mode());
  EXPECT_EQ(g.space().lower(), f.space().lower());
}

TEST(Config, DefaultsAndOverrides) {
  const auto s = config::parse("problem: bnh\nseed: 4\nevaluations_per_epoch: 20\nsurrogate:\n  block_dim: 16\n");
  EXPECT_EQ(s.run.problem, "bnh");
  EXPECT_EQ(s.run.seed, 4u);
  EXPECT_EQ(s.run.population_size, 20u);
  EXPECT_EQ(s.run.surrogate.block_dim, 16u);
  EXPECT_EQ(s.run.generations, 10u);
  EXPECT_FALSE(s.run.feasolve);
}

TEST(Config, YamlRoundTrip) {
  const auto s = config::parse(
      "problem: tnk\nepochs: 3\nstop: \"iteration > 2 and latest('hv') > 0.5\"\nsensitivity: inverted\n"
      "surrogate:\n  mode: c+o\n  learning_rate: 0.0003\n  outlier_threshold: 3.5\n"
      "feasolve:\n  enabled: true\n  targets: [constraint, distance]\n  trace_samples: 4\n");
  const auto t = config::parse(config::to_yaml(s));
  EXPECT_EQ(config::to_yaml(t), config::to_yaml(s));
  EXPECT_EQ(t.run.stop, s.run.stop);
  EXPECT_EQ(t.run.sensitivity, SensitivityMode::inverted);
  EXPECT_EQ(t.run.surrogate.learning_rate, 0.0003);
  EXPECT_EQ(t.run.surrogate.outlier_threshold, 3.5);
  EXPECT_EQ(t.run.feasolve_config.targets, (std::vector<feasolve::Target>{feasolve::Target::constraint, feasolve::Target::distance}));
  EXPECT_EQ(t.run.trace_samples, 4u);
}

TEST(Config, Errors) {
  auto message = [](const std::string& text) {
    try {
      (void)config::parse(text, "run.yaml");
    } catch (const config::ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(message("problem: bnh\noptimiser: nsga2\n"), "run.yaml:2: unknown key 'optimiser' (did you mean 'optimizer'?)");
  EXPECT_NE(message("surrogate:\n  blok_dim: 3\n").find("run.yaml:2: unknown key 'surrogate.blok_dim' (did you mean 'surrogate.block_dim'?)"), std::string::npos);
  EXPECT_NE(message("problem: nope\n").find("unknown problem 'nope'"), std::string::npos);
  EXPECT_NE(message("optimizer: cmaes\n").find("not available"), std::string::npos);
  EXPECT_NE(message("stop: \"iteration >\"\n").find("run.yaml"), std::string::npos);
  EXPECT_NE(message("epochs: [1\n").find("run.yaml:"), std::string::npos);
  EXPECT_NE(message("epochs: lots\n").find("run.yaml:1"), std::string::npos);
  EXPECT_NE(message("feasolve:\n  targets: [gravity]\n").find("run.yaml:2"), std::string::npos);
}

TEST(Config, EditDistance) {
  EXPECT_EQ(config::edit_distance("optimiser", "optimizer"), 1u);
  EXPECT_EQ(config::suggest("zzzzzz", {"seed", "epochs"}), std::nullopt);
}
