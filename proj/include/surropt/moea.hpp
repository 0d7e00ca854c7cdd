#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "surropt/core.hpp"

namespace surropt::moea {

inline constexpr double kMinEta = 1.0;
inline constexpr double kMaxEta = 30.0;
inline constexpr double kDefaultEta = 20.0;

/// Per-dimension SBX and polynomial-mutation distribution indices.
struct DistributionIndices {
  std::vector<double> eta_cross;
  std::vector<double> eta_mut;

  static DistributionIndices uniform(std::size_t n, double eta = kDefaultEta) {
    return {std::vector<double>(n, eta), std::vector<double>(n, eta)};
  }

  void validate(std::size_t n) const {
    if (eta_cross.size() != n || eta_mut.size() != n)
      throw std::invalid_argument("distribution indices: length mismatch");
    for (std::size_t j = 0; j < n; ++j)
      if (eta_cross[j] < kMinEta || eta_cross[j] > kMaxEta || eta_mut[j] < kMinEta || eta_mut[j] > kMaxEta)
        throw std::invalid_argument("distribution indices must lie in [1, 30]");
  }
};

/// A candidate with (predicted or true) objective values and feasibility.
struct Individual {
  Point x;
  ObjectiveVector y;
  bool feasible = true;
  /// True when x is already a true-evaluated point.
  bool evaluated = false;

  [[nodiscard]] bool viable() const noexcept { return !has_nan(y); }
};

struct RankedPopulation {
  std::vector<Individual> members;
  std::vector<std::size_t> front;
  std::vector<double> crowding;

  [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
};

/// Deb's fast non-dominated sort; returns fronts of indices into objs.
[[nodiscard]] inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<ObjectiveVector>& objs) {
  const std::size_t N = objs.size();
  for (const auto& y : objs)
    if (has_nan(y)) throw std::invalid_argument("fast_nondominated_sort: NaN objective");
  std::vector<std::vector<std::size_t>> dominated_by(N);
  std::vector<std::size_t> count(N, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < N; ++p) {
    for (std::size_t r = 0; r < N; ++r) {
      if (p == r) continue;
      if (dominates(objs[p], objs[r]))
        dominated_by[p].push_back(r);
      else if (dominates(objs[r], objs[p]))
        ++count[p];
    }
    if (count[p] == 0) current.push_back(p);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current)
      for (std::size_t r : dominated_by[p])
        if (--count[r] == 0) next.push_back(r);
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

/// Crowding distance within one front; extremes of every objective get +inf.
[[nodiscard]] inline std::vector<double> crowding_distance(const std::vector<ObjectiveVector>& front) {
  const std::size_t N = front.size();
  if (N == 0) throw std::invalid_argument("crowding_distance: empty front");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(N, 0.0);
  if (N <= 2) return std::vector<double>(N, inf);
  const std::size_t q = front.front().size();
  std::vector<std::size_t> order(N);
  for (std::size_t j = 0; j < q; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return front[a][j] < front[b][j]; });
    const double lo = front[order.front()][j];
    const double hi = front[order.back()][j];
    d[order.front()] = inf;
    d[order.back()] = inf;
    const double range = hi - lo;
    if (!(range > 0.0)) continue;
    for (std::size_t i = 1; i + 1 < N; ++i)
      d[order[i]] += (front[order[i + 1]][j] - front[order[i - 1]][j]) / range;
  }
  return d;
}

/// Front indices and crowding for a mixed population. Feasible viable members
/// are sorted first, infeasible viable members continue the front numbering,
/// and members with NaN objectives share the last front.
[[nodiscard]] inline RankedPopulation rank(std::vector<Individual> members) {
  RankedPopulation out;
  const std::size_t N = members.size();
  out.front.assign(N, 0);
  out.crowding.assign(N, 0.0);
  std::vector<std::size_t> feas, infeas, bad;
  for (std::size_t i = 0; i < N; ++i) {
    if (!members[i].viable())
      bad.push_back(i);
    else if (members[i].feasible)
      feas.push_back(i);
    else
      infeas.push_back(i);
  }
  std::size_t offset = 0;
  for (const auto* group : {&feas, &infeas}) {
    if (group->empty()) continue;
    std::vector<ObjectiveVector> objs;
    for (std::size_t i : *group) objs.push_back(members[i].y);
    const auto fronts = fast_nondominated_sort(objs);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
      std::vector<ObjectiveVector> fobjs;
      for (std::size_t i : fronts[f]) fobjs.push_back(objs[i]);
      const auto cd = crowding_distance(fobjs);
      for (std::size_t t = 0; t < fronts[f].size(); ++t) {
        const std::size_t idx = (*group)[fronts[f][t]];
        out.front[idx] = offset + f;
        out.crowding[idx] = cd[t];
      }
    }
    offset += fronts.size();
  }
  for (std::size_t i : bad) out.front[i] = offset;
  out.members = std::move(members);
  return out;
}

/// Order of members by front ascending, crowding descending, index ascending.
[[nodiscard]] inline std::vector<std::size_t> sorted_order(const RankedPopulation& r) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (r.front[a] != r.front[b]) return r.front[a] < r.front[b];
    return r.crowding[a] > r.crowding[b];
  });
  return order;
}

/// The M best members in rank order, re-ranked among themselves.
[[nodiscard]] inline RankedPopulation truncate(const RankedPopulation& r, std::size_t M) {
  const auto order = sorted_order(r);
  std::vector<Individual> kept;
  for (std::size_t i = 0; i < std::min(M, order.size()); ++i) kept.push_back(r.members[order[i]]);
  auto out = rank(std::move(kept));
  const auto o2 = sorted_order(out);
  RankedPopulation sorted;
  for (std::size_t i : o2) {
    sorted.members.push_back(std::move(out.members[i]));
    sorted.front.push_back(out.front[i]);
    sorted.crowding.push_back(out.crowding[i]);
  }
  return sorted;
}

/// Binary tournament: feasibility first, then lower front, then larger
/// crowding, then a fair coin. Returns the winning index.
[[nodiscard]] inline std::size_t constrained_tournament(const RankedPopulation& r, std::size_t a, std::size_t b,
                                                        RandomStream& rng) {
  const bool fa = r.members[a].feasible && r.members[a].viable();
  const bool fb = r.members[b].feasible && r.members[b].viable();
  if (fa != fb) return fa ? a : b;
  if (r.front[a] != r.front[b]) return r.front[a] < r.front[b] ? a : b;
  if (r.crowding[a] != r.crowding[b]) return r.crowding[a] > r.crowding[b] ? a : b;
  return rng.coin() ? a : b;
}

/// SBX spread factor for a uniform draw u.
[[nodiscard]] inline double sbx_beta(double u, double eta) {
  const double e = 1.0 / (eta + 1.0);
  return u <= 0.5 ? std::pow(2.0 * u, e) : std::pow(1.0 / (2.0 * (1.0 - u)), e);
}

/// One-dimensional SBX children of parent values a and b for draw u.
[[nodiscard]] inline std::pair<double, double> sbx_pair(double a, double b, double eta, double u) {
  const double beta = sbx_beta(u, eta);
  return {0.5 * ((1.0 + beta) * a + (1.0 - beta) * b), 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b)};
}

struct VariationOptions {
  double crossover_prob = 0.9;
  /// Per-coordinate mutation probability; negative means 1/n.
  double mutation_rate = -1.0;
  /// Probability that an individual coordinate takes part in a crossover.
  double variable_swap_prob = 0.5;
};

/// Simulated binary crossover with per-dimension indices; children clipped.
[[nodiscard]] inline std::pair<Point, Point> sbx_crossover(const Point& p1, const Point& p2,
                                                           const DistributionIndices& eta,
                                                           const ParameterSpace& space, RandomStream& rng,
                                                           double variable_prob = 0.5) {
  Point c1 = p1, c2 = p2;
  for (std::size_t j = 0; j < p1.size(); ++j) {
    if (rng.uniform() > variable_prob) continue;
    const double u = rng.uniform();
    std::tie(c1[j], c2[j]) = sbx_pair(p1[j], p2[j], eta.eta_cross[j], u);
  }
  space.clip(c1);
  space.clip(c2);
  return {std::move(c1), std::move(c2)};
}

/// Bounded polynomial-mutation step for one coordinate with draw u.
[[nodiscard]] inline double polynomial_delta(double y, double lo, double hi, double eta, double u) {
  const double width = hi - lo;
  const double d1 = (y - lo) / width;
  const double d2 = (hi - y) / width;
  const double power = 1.0 / (eta + 1.0);
  double dq;
  if (u < 0.5) {
    const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
    dq = std::pow(val, power) - 1.0;
  } else {
    const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
    dq = 1.0 - std::pow(val, power);
  }
  return dq * width;
}

[[nodiscard]] inline Point polynomial_mutation(const Point& p, const DistributionIndices& eta, double rate,
                                               const ParameterSpace& space, RandomStream& rng) {
  Point out = p;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(rng.uniform() < rate)) continue;
    const double u = rng.uniform();
    out[j] += polynomial_delta(out[j], space.lower()[j], space.upper()[j], eta.eta_mut[j], u);
  }
  space.clip(out);
  return out;
}

/// M offspring from a ranked parent pool via tournament, SBX and mutation.
[[nodiscard]] inline std::vector<Point> make_offspring(const RankedPopulation& parents, std::size_t M,
                                                       const DistributionIndices& eta, const ParameterSpace& space,
                                                       RandomStream& rng, const VariationOptions& opt = {}) {
  if (parents.size() == 0) throw std::invalid_argument("make_offspring: empty parent pool");
  const double rate = opt.mutation_rate < 0.0 ? 1.0 / static_cast<double>(space.dim()) : opt.mutation_rate;
  const std::size_t P = parents.size();
  std::vector<Point> kids;
  kids.reserve(M + 1);
  while (kids.size() < M) {
    const std::size_t a = constrained_tournament(parents, rng.below(P), rng.below(P), rng);
    const std::size_t b = constrained_tournament(parents, rng.below(P), rng.below(P), rng);
    Point c1 = parents.members[a].x;
    Point c2 = parents.members[b].x;
    if (rng.uniform() < opt.crossover_prob)
      std::tie(c1, c2) = sbx_crossover(c1, c2, eta, space, rng, opt.variable_swap_prob);
    kids.push_back(polynomial_mutation(c1, eta, rate, space, rng));
    if (kids.size() < M) kids.push_back(polynomial_mutation(c2, eta, rate, space, rng));
  }
  return kids;
}

/// Batch predictor: objectives (rows x q) and constraint probabilities
/// (rows x k, possibly k = 0) in candidate order.
using Predictor =
    std::function<void(const std::vector<Point>&, std::vector<ObjectiveVector>&, std::vector<std::vector<double>>&)>;

inline constexpr double kFeasibleProbability = 0.5;

[[nodiscard]] inline std::vector<Individual> predict_individuals(const std::vector<Point>& xs,
                                                                 const Predictor& predictor) {
  std::vector<ObjectiveVector> Y;
  std::vector<std::vector<double>> C;
  predictor(xs, Y, C);
  if (Y.size() != xs.size()) throw std::logic_error("predictor returned the wrong number of rows");
  std::vector<Individual> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i].x = xs[i];
    out[i].y = std::move(Y[i]);
    out[i].feasible = true;
    if (i < C.size())
      for (double p : C[i])
        if (!(p >= kFeasibleProbability)) out[i].feasible = false;
  }
  return out;
}

struct GenerateResult {
  /// Final population of size M, in rank order.
  RankedPopulation population;
  /// Every offspring created across all generations, in creation order.
  std::vector<Individual> offspring;
};

/// G generations of NSGA-II against surrogate predictions. The initial
/// population is re-predicted so every comparison uses the same model;
/// `evaluated` flags on the inputs are carried through.
[[nodiscard]] inline GenerateResult generate(const std::vector<Individual>& initial, const Predictor& predictor,
                                             std::size_t G, const DistributionIndices& eta,
                                             const ParameterSpace& space, RandomStream& rng,
                                             const VariationOptions& opt = {}) {
  if (G < 1) throw std::invalid_argument("generate: need at least one generation");
  if (initial.empty()) throw std::invalid_argument("generate: empty population");
  eta.validate(space.dim());
  const std::size_t M = initial.size();
  std::vector<Point> xs;
  for (const auto& ind : initial) xs.push_back(ind.x);
  auto start = predict_individuals(xs, predictor);
  for (std::size_t i = 0; i < M; ++i) start[i].evaluated = initial[i].evaluated;
  auto pop = truncate(rank(std::move(start)), M);

  GenerateResult result;
  for (std::size_t g = 0; g < G; ++g) {
    auto kids = predict_individuals(make_offspring(pop, M, eta, space, rng, opt), predictor);
    result.offspring.insert(result.offspring.end(), kids.begin(), kids.end());
    std::vector<Individual> combined = pop.members;
    combined.insert(combined.end(), std::make_move_iterator(kids.begin()), std::make_move_iterator(kids.end()));
    pop = truncate(rank(std::move(combined)), M);
  }
  result.population = std::move(pop);
  return result;
}

}  // namespace surropt::moea
