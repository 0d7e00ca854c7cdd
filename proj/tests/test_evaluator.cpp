#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "surropt/evaluator.hpp"

using namespace surropt;

namespace {

std::vector<Point> grid(std::size_t n) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back({0.01 * i, 1.0 - 0.01 * i, 0.5});
  return pts;
}

}  // namespace

TEST(Evaluator, WorkerCountDoesNotChangeResults) {
  const auto p = make_problem("two_sphere");
  const auto pts = grid(60);
  const auto one = evaluate_batch(p, pts, 1, 4);
  const auto many = evaluate_batch(p, pts, 8, 4);
  ASSERT_EQ(one.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(one[i].index, i);
    EXPECT_EQ(many[i].index, i);
    EXPECT_EQ(one[i].batch, 4u);
    EXPECT_EQ(one[i].objectives, many[i].objectives);
    EXPECT_EQ(one[i].objectives, p.evaluate(pts[i]).objectives);
    EXPECT_EQ(one[i].attempts, 1u);
    EXPECT_FALSE(one[i].failed());
  }
}

TEST(Evaluator, EmptyBatch) {
  EXPECT_TRUE(evaluate_batch(make_problem("bnh"), {}, 3).empty());
  EXPECT_THROW((void)evaluate_batch(make_problem("bnh"), grid(1), 0), std::invalid_argument);
}

TEST(Evaluator, EachCandidateEvaluatedExactlyOnce) {
  auto p = make_problem("two_sphere");
  auto calls = std::make_shared<std::atomic<int>>(0);
  const auto inner = p.evaluate;
  p.evaluate = [calls, inner](std::span<const double> x) {
    ++*calls;
    return inner(x);
  };
  (void)evaluate_batch(p, grid(97), 8);
  EXPECT_EQ(calls->load(), 97);
}

TEST(Evaluator, FailingCandidateIsRetriedThenMarked) {
  auto p = make_problem("bnh");
  auto calls = std::make_shared<std::atomic<int>>(0);
  const auto inner = p.evaluate;
  p.evaluate = [calls, inner](std::span<const double> x) {
    if (x[0] > 4.0) {
      ++*calls;
      throw std::runtime_error("simulator crashed");
    }
    return inner(x);
  };
  const auto r = evaluate_batch(p, {{1.0, 1.0}, {4.5, 1.0}}, 2);
  EXPECT_FALSE(r[0].failed());
  EXPECT_TRUE(r[1].failed());
  EXPECT_EQ(r[1].error, "simulator crashed");
  EXPECT_EQ(r[1].attempts, 2u);
  EXPECT_EQ(calls->load(), 2);
  EXPECT_TRUE(std::isnan(r[1].objectives[0]) && std::isnan(r[1].objectives[1]));
  EXPECT_EQ(r[1].constraints, (ConstraintVector{0, 0}));
}

TEST(Evaluator, TransientFailureRecovers) {
  auto p = make_problem("bnh");
  auto calls = std::make_shared<std::atomic<int>>(0);
  const auto inner = p.evaluate;
  p.evaluate = [calls, inner](std::span<const double> x) {
    if (++*calls == 1) throw std::runtime_error("flaky");
    return inner(x);
  };
  const auto r = evaluate_batch(p, {{1.0, 1.0}}, 1);
  EXPECT_FALSE(r[0].failed());
  EXPECT_EQ(r[0].attempts, 2u);
  EXPECT_EQ(r[0].objectives, p.evaluate(Point{1.0, 1.0}).objectives);
}
