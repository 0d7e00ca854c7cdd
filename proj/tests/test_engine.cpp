#include <gtest/gtest.h>

#include "surropt/engine.hpp"

using namespace surropt;

namespace {

RunConfig small(std::string problem, std::size_t epochs, std::size_t M = 20) {
  RunConfig c;
  c.problem = std::move(problem);
  c.initial_samples = 30;
  c.evaluations_per_epoch = M;
  c.population_size = M;
  c.epochs = epochs;
  c.generations = 5;
  c.surrogate.block_dim = 16;
  c.surrogate.max_epochs = 60;
  c.seed = 11;
  return c;
}

}  // namespace

TEST(ModeFallback, PatternCounts) {
  auto rec = [](ConstraintVector c) { return EvaluationRecord{{0.0}, {0.0}, std::move(c), 0, Provenance::init}; };
  std::vector<EvaluationRecord> h{rec({1, 1, 1}), rec({1, 1, 1})};
  EXPECT_EQ(select_surrogate_mode(h), SurrogateMode::o);
  h.push_back(rec({1, 0, 1}));
  EXPECT_EQ(select_surrogate_mode(h), SurrogateMode::o);
  h.push_back(rec({0, 1, 1}));
  EXPECT_EQ(select_surrogate_mode(h), SurrogateMode::co);
  EXPECT_EQ(select_surrogate_mode(h, SurrogateMode::o), SurrogateMode::o);
  EXPECT_EQ(select_surrogate_mode(std::vector<EvaluationRecord>{rec({})}), SurrogateMode::o);
}

TEST(RunConfig, Validation) {
  auto c = small("bnh", 1);
  c.population_size = 10;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small("bnh", 0);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small("bnh", 1);
  c.surrogate.mode = SurrogateMode::c;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small("bnh", 1);
  c.stop = "iteration >";
  EXPECT_THROW(c.validate(), stop::ParseError);
  c = small("bnh", 1);
  c.sub_iterations = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Engine, BudgetIsExact) {
  for (std::size_t E : {1u, 3u}) {
    const auto h = run(small("bnh", E));
    EXPECT_EQ(h.size(), 30 + E * 20);
    ASSERT_EQ(h.metrics().size(), E + 1);
    for (std::size_t e = 0; e <= E; ++e) EXPECT_EQ(h.metrics()[e].cumulative_evals, 30 + e * 20);
    EXPECT_EQ(h.metrics()[0].mode, "none");
    EXPECT_EQ(h.metrics()[1].mode, "o");
  }
}

TEST(Engine, DeterministicAcrossWorkers) {
  auto a = small("srn", 2);
  auto b = a;
  b.workers = 8;
  const auto ha = run(a), hb = run(b);
  EXPECT_EQ(ha.records(), hb.records());
  auto c = a;
  c.seed = 12;
  EXPECT_NE(ha.records(), run(c).records());
}

TEST(Engine, ArchiveHvNondecreasing) {
  for (const char* p : {"two_sphere", "tnk"}) {
    const auto h = run(small(p, 5));
    for (std::size_t i = 1; i < h.metrics().size(); ++i)
      EXPECT_GE(h.metrics()[i].hv_norm, h.metrics()[i - 1].hv_norm) << p;
    EXPECT_EQ(Engine::archive_hv_series(h).back(), h.metrics().back().hv_norm);
  }
}

TEST(Engine, FeasolveKeepsEliteHalf) {
  auto c = small("tnk", 2);
  c.feasolve = true;
  c.feasolve_config.max_iters = 40;
  std::size_t epochs = 0;
  Engine eng(c);
  eng.on_epoch([&](const EpochEvent& ev) {
    if (ev.metrics->epoch == 0) return;
    ++epochs;
    std::size_t moea = 0, solved = 0;
    for (const auto& r : ev.new_records) {
      moea += r.provenance == Provenance::moea;
      solved += r.provenance == Provenance::feasolve;
    }
    EXPECT_EQ(moea, 10u);
    EXPECT_EQ(solved, 10u);
    ASSERT_EQ(ev.traces.size(), 1u);
    EXPECT_GT(ev.traces[0].steps.size(), 1u);
    // The elite half is evaluated exactly where the descent did not touch it.
    for (std::size_t i = 0; i < 10; ++i)
      for (const auto& x : ev.traces[0].steps.front().candidates) EXPECT_NE(ev.new_records[i].params, x);
  });
  const auto h = eng.run();
  EXPECT_EQ(epochs, 2u);
  EXPECT_GT(h.metrics().back().feasolve_steps, 0u);
}

TEST(Engine, TraceSamplesFillExploreSlots) {
  auto c = small("tnk", 1);
  c.feasolve = true;
  c.trace_samples = 4;
  c.feasolve_config.max_iters = 30;
  const auto h = run(c);
  std::size_t trace = 0;
  for (const auto& r : h.records()) trace += r.provenance == Provenance::trace;
  EXPECT_GT(trace, 0u);
  EXPECT_LE(trace, 4u);
  EXPECT_EQ(h.size(), 50u);
}

TEST(Engine, SensitivityReported) {
  auto c = small("bnh", 1);
  c.sensitivity = SensitivityMode::inverted;
  Engine eng(c);
  bool seen = false;
  eng.on_epoch([&](const EpochEvent& ev) {
    if (!ev.eta) return;
    seen = true;
    ASSERT_EQ(ev.sensitivity->S_bar.size(), 2u);
    const auto forward = indices_from_sensitivity(*ev.sensitivity);
    EXPECT_EQ(ev.eta->eta_cross, invert_indices(forward).eta_cross);
  });
  (void)eng.run();
  EXPECT_TRUE(seen);
}

TEST(Engine, WithoutSurrogateRunsPlainNsga) {
  auto c = small("bnh", 3);
  c.use_surrogate = false;
  const auto h = run(c);
  EXPECT_EQ(h.size(), 90u);
  for (std::size_t e = 1; e < h.metrics().size(); ++e) EXPECT_EQ(h.metrics()[e].mode, "nsga");
}

TEST(Engine, TrainingFailureFallsBack) {
  auto c = small("bnh", 1);
  c.initial_samples = 4;  // below 2 * folds usable records
  std::vector<std::string> notes;
  Engine eng(c);
  eng.on_epoch([&](const EpochEvent& ev) { notes.insert(notes.end(), ev.notes.begin(), ev.notes.end()); });
  const auto h = eng.run();
  EXPECT_EQ(h.metrics().back().mode, "nsga");
  ASSERT_EQ(notes.size(), 1u);
  EXPECT_NE(notes[0].find("surrogate training failed"), std::string::npos);
}

TEST(Engine, DynamicStop) {
  auto c = small("bnh", 10);
  c.stop = "iteration >= 2";
  const auto h = run(c);
  EXPECT_EQ(h.metrics().size(), 3u);
  EXPECT_EQ(h.size(), 70u);
}

TEST(Engine, SubIterationsSplitBudget) {
  auto c = small("bnh", 1);
  c.sub_iterations = 2;
  EXPECT_EQ(run(c).size(), 50u);
}

TEST(Engine, NanObjectivesKeptButNotArchived) {
  auto c = small("thin_band_nan", 1);
  const auto h = run(c);
  std::size_t nan = 0;
  for (const auto& r : h.records()) nan += !r.viable();
  EXPECT_GT(nan, 0u);
  for (const auto& r : archive_of(h.records()).records()) EXPECT_TRUE(r.viable());
}
