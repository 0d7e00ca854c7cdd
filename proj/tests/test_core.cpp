#include <gtest/gtest.h>

#include <cmath>
#include <thread>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/random.hpp"

using namespace surropt;

TEST(ParameterSpace, RejectsBadBounds) {
  EXPECT_THROW(ParameterSpace({"a"}, {1.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(ParameterSpace({"a"}, {2.0}, {1.0}), std::invalid_argument);
  EXPECT_THROW(ParameterSpace({"a", "a"}, {0.0, 0.0}, {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(ParameterSpace({}, {}, {}), std::invalid_argument);
  EXPECT_THROW(ParameterSpace({"a", "b"}, {0.0}, {1.0, 1.0}), std::invalid_argument);
}

TEST(ParameterSpace, ClipAndContains) {
  const ParameterSpace s({"x", "y"}, {0.0, -1.0}, {1.0, 1.0});
  Point p{2.0, -3.0};
  EXPECT_FALSE(s.contains(p));
  s.clip(p);
  EXPECT_EQ(p, (Point{1.0, -1.0}));
  EXPECT_TRUE(s.contains(p));
  EXPECT_DOUBLE_EQ(s.width(1), 2.0);
}

TEST(Feasibility, ProductOfFlags) {
  EXPECT_TRUE(is_feasible(ConstraintVector{1, 1, 1}));
  EXPECT_FALSE(is_feasible(ConstraintVector{1, 0, 1}));
  EXPECT_TRUE(is_feasible(ConstraintVector{}));
}

TEST(Dominance, Examples) {
  EXPECT_TRUE(dominates(ObjectiveVector{0, 0}, ObjectiveVector{1, 1}));
  EXPECT_FALSE(dominates(ObjectiveVector{0, 1}, ObjectiveVector{1, 0}));
  EXPECT_FALSE(dominates(ObjectiveVector{1, 1}, ObjectiveVector{1, 1}));
  EXPECT_THROW((void)dominates(ObjectiveVector{0}, ObjectiveVector{0, 1}), std::invalid_argument);
  EXPECT_THROW((void)dominates(ObjectiveVector{std::nan(""), 0}, ObjectiveVector{1, 1}), std::invalid_argument);
}

namespace {
EvaluationRecord rec(ObjectiveVector y, Point x = {0.0}, ConstraintVector c = {}) {
  return {std::move(x), std::move(y), std::move(c), 0, Provenance::init};
}
}  // namespace

TEST(ParetoArchive, Examples) {
  ParetoArchive a;
  a.insert(rec({1, 1}));
  EXPECT_EQ(a.insert(rec({0, 0})), ArchiveInsert::inserted);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a.front()[0], (ObjectiveVector{0, 0}));
  EXPECT_EQ(a.insert(rec({1, 1})), ArchiveInsert::dominated);

  ParetoArchive b;
  b.insert(rec({0, 1}));
  b.insert(rec({1, 0}));
  EXPECT_EQ(b.insert(rec({0.5, 0.5})), ArchiveInsert::inserted);
  EXPECT_EQ(b.size(), 3u);
}

TEST(ParetoArchive, FiltersInfeasibleDuplicateAndNan) {
  ParetoArchive a;
  EXPECT_EQ(a.insert(rec({0, 0}, {0.0}, {0})), ArchiveInsert::infeasible);
  EXPECT_EQ(a.insert(rec({std::nan(""), 0})), ArchiveInsert::non_viable);
  EXPECT_EQ(a.insert(rec({1, 2}, {0.5})), ArchiveInsert::inserted);
  EXPECT_EQ(a.insert(rec({1, 2}, {0.5})), ArchiveInsert::duplicate);
  EXPECT_EQ(a.insert(rec({1, 2}, {0.7})), ArchiveInsert::inserted);
  EXPECT_EQ(a.size(), 2u);
}

TEST(ParetoArchive, RandomInsertionsMatchBruteForce) {
  RandomStream rng(7, "archive");
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvaluationRecord> all;
    ParetoArchive a;
    for (int i = 0; i < 40; ++i) {
      all.push_back(rec({std::floor(rng.uniform() * 8), std::floor(rng.uniform() * 8), std::floor(rng.uniform() * 8)},
                        {static_cast<double>(i)}));
      a.insert(all.back());
    }
    std::size_t expected = 0;
    for (const auto& r : all) {
      bool dominated = false;
      for (const auto& s : all) dominated = dominated || dominates(s.objectives, r.objectives);
      expected += dominated ? 0 : 1;
    }
    EXPECT_EQ(a.size(), expected);
    for (const auto& m : a.records())
      for (const auto& o : a.records()) EXPECT_FALSE(dominates(o.objectives, m.objectives));
  }
}

TEST(RunHistory, EpochsMonotone) {
  RunHistory h;
  auto r = rec({0, 0});
  r.epoch = 2;
  h.append(r);
  r.epoch = 1;
  EXPECT_THROW(h.append(r), std::logic_error);
  EpochMetrics m;
  h.append_metrics(m);
  EXPECT_THROW(h.append_metrics(m), std::logic_error);
}

TEST(RunHistory, ArchiveFromHistoryMatchesIncremental) {
  RandomStream rng(3, "history");
  RunHistory h;
  ParetoArchive inc;
  for (int i = 0; i < 200; ++i) {
    auto r = rec({rng.uniform(), rng.uniform()}, {rng.uniform()}, {static_cast<std::uint8_t>(rng.coin())});
    r.epoch = static_cast<std::size_t>(i / 20);
    h.append(r);
    inc.insert(r);
  }
  EXPECT_EQ(archive_of(h.records()).records(), inc.records());
}

TEST(RandomStream, LabelsGiveIndependentReproducibleStreams) {
  RandomStream a(1, "run"), b(1, "run");
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a(), b());
  auto c = RandomStream(1, "run").derive("x");
  auto d = RandomStream(1, "run").derive("y");
  EXPECT_NE(c(), d());
  RandomStream e(1, "run");
  double lo = 1, hi = 0;
  for (int i = 0; i < 10000; ++i) {
    const double u = e.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    EXPECT_LT(e.below(7), 7u);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
}
