#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "surropt/sampling.hpp"

using namespace surropt;

namespace {
std::vector<std::size_t> strata(const std::vector<Point>& pts, std::size_t j, std::size_t N) {
  std::vector<std::size_t> s;
  for (const auto& p : pts) s.push_back(static_cast<std::size_t>(p[j] * static_cast<double>(N)));
  std::sort(s.begin(), s.end());
  return s;
}
}  // namespace

TEST(Slhc, TwoPointsAreMirrored) {
  RandomStream rng(1, "t");
  const auto d = sample_slhc(ParameterSpace::uniform(1, 0, 1), 2, rng);
  ASSERT_EQ(d.points.size(), 2u);
  const double a = std::min(d.points[0][0], d.points[1][0]);
  const double b = std::max(d.points[0][0], d.points[1][0]);
  EXPECT_LT(a, 0.5);
  EXPECT_GT(b, 0.5);
  EXPECT_NEAR(a + b, 1.0, 1e-15);
}

TEST(Slhc, OnePointPerStratum) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RandomStream rng(seed, "t");
    for (std::size_t N : {4u, 10u, 64u}) {
      const auto d = sample_slhc(ParameterSpace::uniform(3, 0, 1), N, rng);
      for (std::size_t j = 0; j < 3; ++j) {
        const auto s = strata(d.points, j, N);
        for (std::size_t i = 0; i < N; ++i) EXPECT_EQ(s[i], i);
      }
    }
  }
}

TEST(Slhc, MeanIsCenter) {
  RandomStream rng(5, "t");
  const ParameterSpace space({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l"},
                             Point(12, -2.0), Point(12, 3.0));
  const auto d = sample_slhc(space, 100, rng);
  for (std::size_t j = 0; j < 12; ++j) {
    double m = 0;
    for (const auto& p : d.points) m += p[j];
    EXPECT_NEAR(m / 100.0, 0.5, 1e-9);
  }
}

TEST(Slhc, OddCountSuggestsEven) {
  RandomStream rng(1, "t");
  try {
    (void)sample_slhc(ParameterSpace::uniform(2, 0, 1), 7, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("use 8"), std::string::npos);
  }
}

TEST(Lhc, OnePointPerThird) {
  RandomStream rng(2, "t");
  const auto d = sample_lhc(ParameterSpace::uniform(1, 0, 1), 3, rng);
  EXPECT_EQ(strata(d.points, 0, 3), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Mc, SinglePointInBox) {
  RandomStream rng(2, "t");
  const ParameterSpace s({"x", "y"}, {-1, 5}, {1, 6});
  const auto d = sample_mc(s, 1, rng);
  ASSERT_EQ(d.points.size(), 1u);
  EXPECT_TRUE(s.contains(d.points[0]));
}

// Reference points from an independent unscrambled Sobol implementation
// (Joe-Kuo direction numbers).
TEST(Sobol, MatchesReferenceSequence) {
  RandomStream rng(0, "t");
  const std::vector<Point> ref2 = {{0.0, 0.0},     {0.5, 0.5},     {0.75, 0.25},   {0.25, 0.75},
                                   {0.375, 0.375}, {0.875, 0.875}, {0.625, 0.125}, {0.125, 0.625}};
  EXPECT_EQ(sample_sobol(ParameterSpace::uniform(2, 0, 1), 8, rng).points, ref2);
  const std::vector<Point> ref5 = {{0, 0, 0, 0, 0},
                                   {0.5, 0.5, 0.5, 0.5, 0.5},
                                   {0.75, 0.25, 0.25, 0.25, 0.75},
                                   {0.25, 0.75, 0.75, 0.75, 0.25},
                                   {0.375, 0.375, 0.625, 0.875, 0.375},
                                   {0.875, 0.875, 0.125, 0.375, 0.875},
                                   {0.625, 0.125, 0.875, 0.625, 0.625},
                                   {0.125, 0.625, 0.375, 0.125, 0.125}};
  EXPECT_EQ(sample_sobol(ParameterSpace::uniform(5, 0, 1), 8, rng).points, ref5);
}

TEST(Sobol, FirstFourEquidistribute) {
  RandomStream rng(0, "t");
  const auto d = sample_sobol(ParameterSpace::uniform(2, 0, 1), 4, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto lower = std::count_if(d.points.begin(), d.points.end(), [&](const Point& p) { return p[j] < 0.5; });
    EXPECT_EQ(lower, 2);
  }
}

TEST(Sampling, DispatchAndNames) {
  for (auto s : {SamplingScheme::slhc, SamplingScheme::lhc, SamplingScheme::mc, SamplingScheme::sobol}) {
    EXPECT_EQ(sampling_scheme_from_string(to_string(s)), s);
    RandomStream rng(9, "t");
    const auto d = sample(s, ParameterSpace::uniform(4, 0, 2), 16, rng);
    EXPECT_EQ(d.points.size(), 16u);
    for (const auto& p : d.points) EXPECT_TRUE(ParameterSpace::uniform(4, 0, 2).contains(p));
  }
  EXPECT_THROW((void)sampling_scheme_from_string("halton"), std::invalid_argument);
}
