#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "surropt/core.hpp"

namespace surropt {

struct Evaluation {
  ObjectiveVector objectives;
  ConstraintVector constraints;
};

/// A deterministic black-box problem: bounded space, q objectives to
/// minimize, k binary constraints.
struct ProblemDefinition {
  std::string name;
  ParameterSpace space;
  std::size_t q = 0;
  std::size_t k = 0;
  std::function<Evaluation(std::span<const double>)> evaluate;
  std::string description;
  std::string pareto;
  /// Joint feasibility rate under uniform sampling (10^7-sample Monte Carlo).
  double feasibility_rate = 1.0;
  /// Per-constraint satisfaction rates under uniform sampling.
  std::vector<double> constraint_rates;
};

/// Squared distance from v to [l, u]; 0 inside the range, NaN propagates.
[[nodiscard]] inline double range_distance_objective(double v, double l, double u) {
  if (l > u) throw std::invalid_argument("range_distance_objective: lower > upper");
  if (std::isnan(v)) return v;
  if (v >= l && v <= u) return 0.0;
  const double d = std::min(std::abs(v - l), std::abs(v - u));
  return d * d;
}

[[nodiscard]] inline std::uint8_t flag(bool satisfied) noexcept { return satisfied ? 1 : 0; }

namespace detail {

inline double squared_distance(std::span<const double> x, std::span<const double> c) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - c[j]) * (x[j] - c[j]);
  return s;
}

}  // namespace detail

/// f1 = |x - a|^2, f2 = |x - b|^2 on the unit box; the Pareto set is the segment [a, b].
[[nodiscard]] inline ProblemDefinition make_two_sphere(std::size_t n, Point a, Point b) {
  if (a.size() != n || b.size() != n) throw std::invalid_argument("two_sphere: centers must have length n");
  if (a == b) throw std::invalid_argument("two_sphere: centers must differ");
  ProblemDefinition p;
  p.name = "two_sphere";
  p.space = ParameterSpace::uniform(n, 0.0, 1.0);
  p.q = 2;
  p.k = 0;
  p.evaluate = [a = std::move(a), b = std::move(b)](std::span<const double> x) {
    return Evaluation{{detail::squared_distance(x, a), detail::squared_distance(x, b)}, {}};
  };
  p.description = "two squared-distance objectives, unconstrained";
  p.pareto = "segment between the two centers";
  p.feasibility_rate = 1.0;
  return p;
}

inline constexpr double kThinBandWidth = 0.02;
inline constexpr double kThinBandSine = 0.95;

/// Two-sphere objectives (centers 0.2 and 0.8 on the diagonal) under three
/// binary constraints whose joint feasible set is a thin band:
/// |x1 - x2| <= 0.02, |x2 - x3| <= 0.02, sin(pi x1) >= 0.95.
/// With nan_outside_validity, objectives are NaN when the last coordinate
/// exceeds 0.9 (a non-viable region).
[[nodiscard]] inline ProblemDefinition make_thin_band(std::size_t n, bool nan_outside_validity = false) {
  if (n < 3) throw std::invalid_argument("thin_band needs n >= 3");
  ProblemDefinition p;
  p.name = nan_outside_validity ? "thin_band_nan" : "thin_band";
  p.space = ParameterSpace::uniform(n, 0.0, 1.0);
  p.q = 2;
  p.k = 3;
  const Point a(n, 0.2);
  const Point b(n, 0.8);
  p.evaluate = [a, b, nan_outside_validity](std::span<const double> x) {
    Evaluation e;
    if (nan_outside_validity && x.back() > 0.9) {
      e.objectives = {std::nan(""), std::nan("")};
    } else {
      e.objectives = {detail::squared_distance(x, a), detail::squared_distance(x, b)};
    }
    e.constraints = {flag(std::abs(x[0] - x[1]) <= kThinBandWidth), flag(std::abs(x[1] - x[2]) <= kThinBandWidth),
                     flag(std::sin(M_PI * x[0]) >= kThinBandSine)};
    return e;
  };
  p.description = "thin feasibility band: near-equal x1, x2, x3 with x1 in the sine band";
  p.pareto = "diagonal segment between 0.2 and 0.8 restricted to the feasible band";
  // Measured at n = 6; the constraints only involve x1..x3, so the rates hold for any n.
  p.feasibility_rate = 3.27e-4;
  p.constraint_rates = {0.03965, 0.03970, 0.20214};
  return p;
}

/// Binh and Korn: x1 in [0, 5], x2 in [0, 3].
[[nodiscard]] inline ProblemDefinition make_bnh() {
  ProblemDefinition p;
  p.name = "bnh";
  p.space = ParameterSpace({"x1", "x2"}, {0.0, 0.0}, {5.0, 3.0});
  p.q = 2;
  p.k = 2;
  p.evaluate = [](std::span<const double> x) {
    const double f1 = 4.0 * x[0] * x[0] + 4.0 * x[1] * x[1];
    const double f2 = (x[0] - 5.0) * (x[0] - 5.0) + (x[1] - 5.0) * (x[1] - 5.0);
    const double g1 = (x[0] - 5.0) * (x[0] - 5.0) + x[1] * x[1];
    const double g2 = (x[0] - 8.0) * (x[0] - 8.0) + (x[1] + 3.0) * (x[1] + 3.0);
    return Evaluation{{f1, f2}, {flag(g1 <= 25.0), flag(g2 >= 7.7)}};
  };
  p.description = "Binh-Korn biobjective problem with two constraints";
  p.pareto = "x1 = x2 in [0, 3], then x2 = 3 for x1 in [3, 5]";
  p.feasibility_rate = 0.936492;
  p.constraint_rates = {0.936492, 1.0};
  return p;
}

/// Srinivas and Deb: x in [-20, 20]^2.
[[nodiscard]] inline ProblemDefinition make_srn() {
  ProblemDefinition p;
  p.name = "srn";
  p.space = ParameterSpace({"x1", "x2"}, {-20.0, -20.0}, {20.0, 20.0});
  p.q = 2;
  p.k = 2;
  p.evaluate = [](std::span<const double> x) {
    const double f1 = 2.0 + (x[0] - 2.0) * (x[0] - 2.0) + (x[1] - 1.0) * (x[1] - 1.0);
    const double f2 = 9.0 * x[0] - (x[1] - 1.0) * (x[1] - 1.0);
    return Evaluation{{f1, f2}, {flag(x[0] * x[0] + x[1] * x[1] <= 225.0), flag(x[0] - 3.0 * x[1] + 10.0 <= 0.0)}};
  };
  p.description = "Srinivas-Deb biobjective problem with two constraints";
  p.pareto = "x1 = -2.5, x2 in [2.5, 14.79]";
  p.feasibility_rate = 0.1620873;
  p.constraint_rates = {0.4418756, 0.4165135};
  return p;
}

/// Tanaka: x in [0, pi]^2, f = x.
[[nodiscard]] inline ProblemDefinition make_tnk() {
  ProblemDefinition p;
  p.name = "tnk";
  p.space = ParameterSpace({"x1", "x2"}, {0.0, 0.0}, {M_PI, M_PI});
  p.q = 2;
  p.k = 2;
  p.evaluate = [](std::span<const double> x) {
    const double g1 = x[0] * x[0] + x[1] * x[1] - 1.0 - 0.1 * std::cos(16.0 * std::atan2(x[0], x[1]));
    const double g2 = (x[0] - 0.5) * (x[0] - 0.5) + (x[1] - 0.5) * (x[1] - 0.5);
    return Evaluation{{x[0], x[1]}, {flag(g1 >= 0.0), flag(g2 <= 0.5)}};
  };
  p.description = "Tanaka biobjective problem with a wavy constraint boundary";
  p.pareto = "disconnected pieces of the wavy boundary near the unit circle";
  p.feasibility_rate = 0.0508144;
  p.constraint_rates = {0.9202772, 0.1303183};
  return p;
}

[[nodiscard]] inline std::vector<ProblemDefinition> make_constrained_suite() {
  return {make_bnh(), make_srn(), make_tnk()};
}

/// Name-addressable problem registry.
[[nodiscard]] inline std::vector<std::string> problem_names() {
  return {"two_sphere", "thin_band", "thin_band_nan", "bnh", "srn", "tnk"};
}

[[nodiscard]] inline ProblemDefinition make_problem(const std::string& name) {
  if (name == "two_sphere") return make_two_sphere(3, Point(3, 0.25), Point(3, 0.75));
  if (name == "thin_band") return make_thin_band(6);
  if (name == "thin_band_nan") return make_thin_band(6, true);
  if (name == "bnh") return make_bnh();
  if (name == "srn") return make_srn();
  if (name == "tnk") return make_tnk();
  std::string valid;
  for (const auto& n : problem_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown problem '" + name + "'; valid problems: " + valid);
}

}  // namespace surropt
