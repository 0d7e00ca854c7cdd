#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "surropt/feasolve.hpp"
#include "support.hpp"

using namespace surropt;
using namespace surropt::feasolve;
using Eigen::MatrixXd;
using surropt::testing::linear_model;
using surropt::testing::random_model;
using surropt::testing::rel_err;

TEST(ObjectiveLoss, Examples) {
  MatrixXd y(1, 2);
  y << 0.5, 0.5;
  EXPECT_NEAR(loss_objective(y, std::vector<double>{1.0, 1.0}), -0.36, 1e-11);
  for (int q = 1; q <= 4; ++q) {
    MatrixXd at = MatrixXd::Constant(1, q, 2.0);
    EXPECT_NEAR(loss_objective(at, std::vector<double>(q, 2.0)), -std::pow(0.1, q), 1e-11);
  }
  // The batch maximum 5 replaces the training maximum as nadir of column 0.
  MatrixXd dyn(2, 2);
  dyn << 0.5, 0.5, 5.0, 0.1;
  EXPECT_NEAR(loss_objective(dyn, std::vector<double>{1.0, 1.0}), -(1.0 * 0.6 + 0.1 * 1.0), 1e-11);
  MatrixXd clamped(1, 2);
  clamped << 1.0, -3.0;
  EXPECT_EQ(loss_objective(clamped, std::vector<double>{1.0, -1.0}), 0.0);
}

TEST(ConstraintLoss, Examples) {
  EXPECT_NEAR(loss_constraint(MatrixXd::Constant(3, 2, 0.5)), 0.25 * 0.25 * std::log(2.0), 1e-12);
  EXPECT_NEAR(0.25 * 0.25 * std::log(2.0), 0.04332, 1e-5);
  EXPECT_LT(loss_constraint(MatrixXd::Constant(2, 2, 1.0 - 1e-9)), 1e-20);
  MatrixXd c(1, 3);
  c << 0.2, 0.7, 0.9;
  const double bce = -(std::log(0.2) + std::log(0.7) + std::log(0.9)) / 3;
  EXPECT_NEAR(loss_constraint(c, 0.0, 1.0), bce, 1e-12);
}

TEST(DistanceLoss, Examples) {
  MatrixXd x(1, 1), t(1, 1);
  x << 0;
  t << 1;
  EXPECT_DOUBLE_EQ(loss_distance(x, t), -1.0);
  EXPECT_DOUBLE_EQ(loss_distance(t, t), 0.0);
  MatrixXd xs(2, 1);
  xs << 0, 1;
  EXPECT_DOUBLE_EQ(loss_distance(xs, xs), -0.5);
}

TEST(ZeroLoss, Examples) {
  EXPECT_EQ(loss_zero(MatrixXd::Constant(2, 2, 0.3)), 0.0);
  EXPECT_EQ(loss_zero(MatrixXd::Constant(1, 1, -2.0)), 4.0);
  MatrixXd y(1, 2);
  y << -1, 3;
  EXPECT_EQ(loss_zero(y), 1.0);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  RandomStream rng(1, "loss");
  for (int t = 0; t < 50; ++t) {
    const Eigen::Index B = 1 + static_cast<Eigen::Index>(rng.below(5)), q = 1 + static_cast<Eigen::Index>(rng.below(3));
    MatrixXd Y(B, q), C(B, q), T(4, q);
    for (Eigen::Index i = 0; i < Y.size(); ++i) {
      Y.data()[i] = rng.uniform(-1, 2);
      C.data()[i] = rng.uniform(0.05, 0.95);
    }
    for (Eigen::Index i = 0; i < T.size(); ++i) T.data()[i] = rng.uniform();
    std::vector<double> tmax(static_cast<std::size_t>(q));
    for (auto& v : tmax) v = rng.uniform(1.0, 3.0);
    // The batch maximum must not straddle the training maximum for the
    // derivative to exist; nudge it well away.
    for (Eigen::Index j = 0; j < q; ++j)
      if (std::abs(Y.col(j).maxCoeff() - tmax[static_cast<std::size_t>(j)]) < 1e-3) tmax[static_cast<std::size_t>(j)] += 0.1;

    auto check = [&](auto fn, const MatrixXd& at) {
      MatrixXd g;
      fn(at, &g);
      for (Eigen::Index i = 0; i < at.size(); ++i) {
        MatrixXd p = at, m = at;
        p.data()[i] += 1e-6;
        m.data()[i] -= 1e-6;
        const double fd = (fn(p, nullptr) - fn(m, nullptr)) / 2e-6;
        if (std::abs(fd) < 1e-9 && std::abs(g.data()[i]) < 1e-9) continue;
        EXPECT_LT(rel_err(g.data()[i], fd), 1e-4);
      }
    };
    check([&](const MatrixXd& m, MatrixXd* g) { return loss_objective(m, tmax, 1.1, g); }, Y);
    check([&](const MatrixXd& m, MatrixXd* g) { return loss_constraint(m, 2.0, 0.25, g); }, C);
    check([&](const MatrixXd& m, MatrixXd* g) { return loss_distance(m, T, g); }, C);
    check([&](const MatrixXd& m, MatrixXd* g) { return loss_zero(m, g); }, Y);
  }
}

TEST(Targets, ChainedGradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto f = random_model(seed, 3, 2, 2);
    RandomStream rng(seed, "batch");
    std::vector<Point> X(4, Point(3));
    for (auto& x : X)
      for (auto& v : x) v = rng.uniform(-1, 3);
    std::vector<EvaluationRecord> hist;
    for (int i = 0; i < 6; ++i)
      hist.push_back({{rng.uniform(-1, 3), rng.uniform(-1, 3), rng.uniform(-1, 3)}, {rng.uniform(0, 9), rng.uniform(0, 9)},
                      {1, 0}, 0, Provenance::init});
    const auto ctx = Context::from_records(hist, f.space());
    FeasolveConfig cfg;
    for (Target t : {Target::objective, Target::constraint, Target::distance, Target::zero}) {
      const auto e = evaluate_target(t, f, X, cfg, ctx);
      for (std::size_t i = 0; i < X.size(); ++i)
        for (std::size_t j = 0; j < 3; ++j) {
          auto Xp = X, Xm = X;
          Xp[i][j] += 1e-5;
          Xm[i][j] -= 1e-5;
          const double fd = (evaluate_target(t, f, Xp, cfg, ctx).loss - evaluate_target(t, f, Xm, cfg, ctx).loss) / 2e-5;
          const double g = e.grad(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
          if (std::abs(fd) < 1e-8 && std::abs(g) < 1e-8) continue;
          EXPECT_LT(rel_err(g, fd), 1e-4) << to_string(t) << " seed " << seed;
        }
    }
  }
}

TEST(Balance, Examples) {
  MatrixXd g1 = MatrixXd::Zero(1, 2), g2 = MatrixXd::Zero(1, 2);
  g1 << 2, 0;
  g2 << 0, 4;
  EXPECT_TRUE(balance_gradients({g1}).isApprox(g1, 1e-12));
  const MatrixXd b = balance_gradients({g1, g2});
  EXPECT_NEAR(b(0, 0), 2.0, 1e-11);
  EXPECT_NEAR(b(0, 1), 2.0, 1e-11);
  EXPECT_TRUE(balance_gradients({g1, MatrixXd::Zero(1, 2)}).isApprox(g1, 1e-12));
}

TEST(Balance, ScaledTermsShareReferenceNorm) {
  RandomStream rng(2, "bal");
  for (int t = 0; t < 200; ++t) {
    std::vector<MatrixXd> gs;
    for (int k = 0; k < 3; ++k) {
      MatrixXd g(3, 2);
      for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal() * std::pow(10.0, rng.uniform(-3, 3));
      gs.push_back(g);
    }
    for (const auto& g : gs) {
      const MatrixXd scaled = balance_gradients({gs[0], g}) - gs[0];
      EXPECT_NEAR(scaled.norm(), gs[0].norm(), 1e-9 * gs[0].norm());
    }
  }
}

TEST(Plateau, Statistic) {
  EXPECT_TRUE(plateaued(std::vector<double>(50, -3.0), 0.01));
  EXPECT_TRUE(plateaued(std::vector<double>(50, 0.0), 0.01));
  std::vector<double> ramp;
  for (int i = 0; i < 50; ++i) ramp.push_back(1.0 + i);
  EXPECT_FALSE(plateaued(ramp, 0.01));
}

TEST(MakeFeasible, ConstantModelUnchangedAndPlateausAtWindow) {
  const ParameterSpace s = ParameterSpace::uniform(2, 0, 1);
  const auto f = linear_model(s, MatrixXd::Zero(1, 2), Eigen::VectorXd::Constant(1, 2.0), MatrixXd::Zero(1, 2),
                              Eigen::VectorXd::Zero(1));
  const std::vector<Point> X{{0.2, 0.3}, {0.9, 0.1}};
  FeasolveConfig cfg;
  const auto r = make_feasible(X, f, cfg, Context{{2.0}, MatrixXd::Constant(1, 2, 0.5)});
  EXPECT_EQ(r.candidates, X);
  EXPECT_TRUE(r.terminated_early);
  EXPECT_EQ(r.steps, cfg.plateau_window);
  EXPECT_EQ(r.trace.steps.size(), cfg.plateau_window + 1);
}

TEST(MakeFeasible, ConstraintTargetClimbsLogit) {
  const ParameterSpace s = ParameterSpace::uniform(3, -1, 1);
  MatrixXd w(1, 3);
  w << 2.0, -1.0, 0.0;
  const auto f = linear_model(s, MatrixXd::Zero(0, 3), Eigen::VectorXd::Zero(0), w, Eigen::VectorXd::Zero(1));
  FeasolveConfig cfg;
  cfg.targets = {Target::constraint};
  cfg.learning_rate = 0.05;
  const auto r = make_feasible({{0.0, 0.0, 0.5}}, f, cfg, Context{});
  EXPECT_FALSE(r.aborted);
  EXPECT_DOUBLE_EQ(r.candidates[0][0], 1.0);
  EXPECT_DOUBLE_EQ(r.candidates[0][1], -1.0);
  EXPECT_DOUBLE_EQ(r.candidates[0][2], 0.5);
  for (std::size_t i = 1; i < r.trace.steps.size(); ++i)
    EXPECT_LE(r.trace.steps[i].loss, r.trace.steps[i - 1].loss + 1e-15);
}

TEST(MakeFeasible, StaysInBoundsAndTraceIsComplete) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = random_model(seed, 3, 2, 2);
    RandomStream rng(seed, "x");
    std::vector<Point> X(6, Point(3));
    for (auto& x : X)
      for (auto& v : x) v = rng.uniform(-1, 3);
    FeasolveConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.max_iters = 60;
    cfg.targets = {Target::constraint, Target::objective, Target::distance, Target::zero};
    std::vector<EvaluationRecord> hist{{{0, 0, 0}, {1, 1}, {1, 1}, 0, Provenance::init}};
    const auto r = make_feasible(X, f, cfg, Context::from_records(hist, f.space()));
    EXPECT_EQ(r.trace.steps.size(), r.steps + 1);
    for (const auto& st : r.trace.steps) {
      EXPECT_EQ(st.candidates.size(), X.size());
      for (const auto& x : st.candidates) EXPECT_TRUE(f.space().contains(x));
    }
  }
}

TEST(HybridSplit, Sizes) {
  for (auto [M, elite] : {std::pair{100, 50}, {2, 1}, {3, 2}}) {
    moea::RankedPopulation pop;
    for (int i = 0; i < M; ++i) pop.members.push_back({{static_cast<double>(i)}, {static_cast<double>(i), static_cast<double>(M - i)}, true, true});
    pop = moea::rank(std::move(pop.members));
    const auto s = hybrid_epoch_split(pop);
    EXPECT_EQ(static_cast<int>(s.elite.size()), elite);
    EXPECT_EQ(static_cast<int>(s.explore.size()), M - elite);
  }
}

TEST(HybridSplit, EliteIsBestRanked) {
  std::vector<moea::Individual> m;
  for (int i = 0; i < 4; ++i) m.push_back({{0.0 + i}, {1.0 + i, 1.0 + i}, true, true});
  const auto s = hybrid_epoch_split(moea::rank(std::move(m)));
  EXPECT_EQ(s.elite[0].x[0], 0.0);
  EXPECT_EQ(s.elite[1].x[0], 1.0);
}

namespace {

// Direct simulation: recompute every minimum distance at every removal.
std::vector<std::size_t> brute_filter(const std::vector<std::vector<double>>& values, std::size_t k) {
  const std::size_t N = values.size(), d = N ? values[0].size() : 0;
  auto v = values;
  for (std::size_t j = 0; j < d; ++j) {
    double lo = 1e300, hi = -1e300;
    for (auto& r : v) lo = std::min(lo, r[j]), hi = std::max(hi, r[j]);
    for (auto& r : v) r[j] = hi > lo ? (r[j] - lo) / (hi - lo) : 0.0;
  }
  std::vector<std::size_t> alive(N);
  for (std::size_t i = 0; i < N; ++i) alive[i] = i;
  while (alive.size() > k) {
    std::size_t victim = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < alive.size(); ++a) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < alive.size(); ++b) {
        if (a == b) continue;
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += std::pow(v[alive[a]][j] - v[alive[b]][j], 2);
        m = std::min(m, std::sqrt(s));
      }
      if (m < best) best = m, victim = a;
    }
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return alive;
}

}  // namespace

TEST(DiversityFilter, Examples) {
  const std::vector<std::vector<double>> v{{0.0}, {0.1}, {0.5}, {1.0}};
  EXPECT_EQ(trace_diversity_filter(v, 2), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(trace_diversity_filter(v, 4), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(trace_diversity_filter(v, 9), (std::vector<std::size_t>{0, 1, 2, 3}));
  std::vector<std::vector<double>> line;
  for (int i = 0; i < 9; ++i) line.push_back({static_cast<double>(i)});
  const auto kept = trace_diversity_filter(line, 2);
  EXPECT_EQ(kept.back(), 8u);
}

TEST(DiversityFilter, MatchesBruteForce) {
  RandomStream rng(3, "filter");
  for (int t = 0; t < 200; ++t) {
    const std::size_t N = 1 + rng.below(20), d = 1 + rng.below(3), k = 1 + rng.below(N);
    std::vector<std::vector<double>> v(N, std::vector<double>(d));
    for (auto& r : v)
      for (auto& x : r) x = rng.coin() ? std::round(rng.uniform(0, 4)) : rng.uniform();
    EXPECT_EQ(trace_diversity_filter(v, k), brute_filter(v, k));
  }
}
