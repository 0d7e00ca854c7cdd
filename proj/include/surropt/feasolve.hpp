#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/moea.hpp"
#include "surropt/surrogate.hpp"

namespace surropt::feasolve {

using Eigen::MatrixXd;

enum class Target { objective, constraint, distance, zero };

[[nodiscard]] inline std::string_view to_string(Target t) noexcept {
  switch (t) {
    case Target::objective: return "objective";
    case Target::constraint: return "constraint";
    case Target::distance: return "distance";
    case Target::zero: return "zero";
  }
  return "objective";
}

[[nodiscard]] inline Target target_from_string(std::string_view s) {
  for (auto t : {Target::objective, Target::constraint, Target::distance, Target::zero})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown feasolve target '" + std::string(s) +
                              "' (objective, constraint, distance, zero)");
}

inline constexpr double kEpsilon = 1e-12;

struct FeasolveConfig {
  /// Active losses; the first one is the gradient-balancing reference.
  std::vector<Target> targets{Target::constraint, Target::objective};
  std::size_t max_iters = 1000;
  double learning_rate = 1e-3;
  std::size_t plateau_window = 50;
  double plateau_ratio = 0.01;
  double reference_factor = 1.1;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;

  void validate() const {
    if (targets.empty()) throw std::invalid_argument("feasolve: at least one target is required");
    if (plateau_window < 1) throw std::invalid_argument("feasolve: plateau window must be >= 1");
  }

  [[nodiscard]] bool uses_sgd() const noexcept { return targets.size() == 1 && targets.front() == Target::zero; }
};

// ---------------------------------------------------------------------------
// Individual losses. Each returns the scalar and, when requested, its gradient
// with respect to the loss input.

/// Hypervolume-style product loss against a dynamic nadir
/// nadir_j = max(max_i yhat_ij, train_max_j). The nadir's dependence on the
/// batch maximum is differentiated as well.
inline double loss_objective(const MatrixXd& Yhat, std::span<const double> train_max, double reference_factor = 1.1,
                             MatrixXd* grad = nullptr) {
  const Eigen::Index B = Yhat.rows();
  const Eigen::Index q = Yhat.cols();
  if (B == 0) throw std::invalid_argument("loss_objective: empty batch");
  std::vector<double> nadir(static_cast<std::size_t>(q));
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(q), -1);
  for (Eigen::Index j = 0; j < q; ++j) {
    Eigen::Index am = 0;
    const double bmax = Yhat.col(j).maxCoeff(&am);
    const double tmax = j < static_cast<Eigen::Index>(train_max.size()) ? train_max[static_cast<std::size_t>(j)]
                                                                          : -std::numeric_limits<double>::infinity();
    if (bmax > tmax) {
      nadir[static_cast<std::size_t>(j)] = bmax;
      argmax[static_cast<std::size_t>(j)] = am;
    } else {
      nadir[static_cast<std::size_t>(j)] = tmax;
    }
  }
  MatrixXd t(B, q);
  for (Eigen::Index i = 0; i < B; ++i)
    for (Eigen::Index j = 0; j < q; ++j)
      t(i, j) = std::max(reference_factor - Yhat(i, j) / (nadir[static_cast<std::size_t>(j)] + kEpsilon), 0.0);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < B; ++i) loss -= t.row(i).prod();
  if (grad) {
    grad->setZero(B, q);
    for (Eigen::Index j = 0; j < q; ++j) {
      const double denom = nadir[static_cast<std::size_t>(j)] + kEpsilon;
      double dnadir = 0.0;
      for (Eigen::Index i = 0; i < B; ++i) {
        if (!(t(i, j) > 0.0)) continue;
        double others = 1.0;
        for (Eigen::Index l = 0; l < q; ++l)
          if (l != j) others *= t(i, l);
        (*grad)(i, j) += others / denom;
        dnadir -= others * Yhat(i, j) / (denom * denom);
      }
      if (argmax[static_cast<std::size_t>(j)] >= 0) (*grad)(argmax[static_cast<std::size_t>(j)], j) += dnadir;
    }
  }
  return loss;
}

/// Mean binary focal cross-entropy of probabilities against all-ones targets.
inline double loss_constraint(const MatrixXd& Chat, double gamma = 2.0, double alpha = 0.25, MatrixXd* grad = nullptr) {
  const double count = static_cast<double>(Chat.size());
  if (count == 0) {
    if (grad) grad->setZero(Chat.rows(), Chat.cols());
    return 0.0;
  }
  double total = 0.0;
  if (grad) grad->resize(Chat.rows(), Chat.cols());
  for (Eigen::Index j = 0; j < Chat.cols(); ++j)
    for (Eigen::Index i = 0; i < Chat.rows(); ++i) {
      const double c = Chat(i, j);
      const double logc = std::log(c);
      const double w = std::pow(1.0 - c, gamma);
      total += -alpha * w * logc;
      if (grad) {
        double d = -alpha * w / c;
        if (gamma != 0.0) d += alpha * gamma * std::pow(1.0 - c, gamma - 1.0) * logc;
        (*grad)(i, j) = d / count;
      }
    }
  return total / count;
}

/// Negative mean Euclidean distance between normalized candidates (rows) and
/// normalized training inputs (rows).
inline double loss_distance(const MatrixXd& Xn, const MatrixXd& Tn, MatrixXd* grad = nullptr) {
  const Eigen::Index B = Xn.rows();
  const Eigen::Index N = Tn.rows();
  if (B == 0 || N == 0) throw std::invalid_argument("loss_distance: empty input");
  const double scale = 1.0 / (static_cast<double>(B) * static_cast<double>(N));
  double total = 0.0;
  if (grad) grad->setZero(B, Xn.cols());
  for (Eigen::Index i = 0; i < B; ++i)
    for (Eigen::Index j = 0; j < N; ++j) {
      const Eigen::RowVectorXd diff = Xn.row(i) - Tn.row(j);
      const double dist = diff.norm();
      total += dist;
      if (grad && dist > 0.0) grad->row(i) -= scale * diff / dist;
    }
  return -total * scale;
}

/// Squared penalty on negative predicted objectives.
inline double loss_zero(const MatrixXd& Yhat, MatrixXd* grad = nullptr) {
  double total = 0.0;
  if (grad) grad->resize(Yhat.rows(), Yhat.cols());
  for (Eigen::Index j = 0; j < Yhat.cols(); ++j)
    for (Eigen::Index i = 0; i < Yhat.rows(); ++i) {
      const double neg = std::max(-Yhat(i, j), 0.0);
      total += neg * neg;
      if (grad) (*grad)(i, j) = -2.0 * neg;
    }
  return total;
}

/// Every gradient rescaled to the L2 norm of the first. Zero gradients stay
/// zero.
[[nodiscard]] inline std::vector<MatrixXd> scaled_gradients(const std::vector<MatrixXd>& grads) {
  if (grads.empty()) throw std::invalid_argument("balance_gradients: no gradients");
  const double ref = grads.front().norm();
  std::vector<MatrixXd> out;
  for (const auto& g : grads) {
    const double norm = g.norm();
    out.push_back(norm > 0.0 ? MatrixXd((ref / norm) * g) : MatrixXd::Zero(g.rows(), g.cols()));
  }
  return out;
}

[[nodiscard]] inline MatrixXd balance_gradients(const std::vector<MatrixXd>& grads) {
  const auto scaled = scaled_gradients(grads);
  MatrixXd total = MatrixXd::Zero(grads.front().rows(), grads.front().cols());
  for (const auto& g : scaled) total += g;
  return total;
}

// ---------------------------------------------------------------------------

/// Data the losses need from the optimization history.
struct Context {
  /// Column-wise maxima of the viable training objectives.
  std::vector<double> train_max;
  /// Bounds-normalized training inputs, one row per record.
  MatrixXd train_inputs;

  static Context from_records(std::span<const EvaluationRecord> records, const ParameterSpace& space) {
    Context c;
    std::vector<const EvaluationRecord*> ok;
    for (const auto& r : records)
      if (r.viable()) ok.push_back(&r);
    if (!ok.empty()) c.train_max.assign(ok.front()->objectives.size(), -std::numeric_limits<double>::infinity());
    c.train_inputs.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t i = 0; i < records.size(); ++i)
      for (std::size_t j = 0; j < space.dim(); ++j)
        c.train_inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            (records[i].params[j] - space.lower()[j]) / space.width(j);
    for (const auto* r : ok)
      for (std::size_t j = 0; j < c.train_max.size(); ++j) c.train_max[j] = std::max(c.train_max[j], r->objectives[j]);
    return c;
  }
};

[[nodiscard]] inline MatrixXd to_matrix(const std::vector<Point>& X) {
  if (X.empty()) return {};
  MatrixXd m(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(X.front().size()));
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t j = 0; j < X[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = X[i][j];
  return m;
}

[[nodiscard]] inline std::vector<Point> from_matrix(const MatrixXd& m) {
  std::vector<Point> out(static_cast<std::size_t>(m.rows()), Point(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

struct TargetEvaluation {
  double loss = 0.0;
  MatrixXd grad;  // B x n, raw parameter units
};

/// One loss and its exact gradient with respect to raw candidate parameters.
[[nodiscard]] inline TargetEvaluation evaluate_target(Target target, const JointSurrogate& f, const std::vector<Point>& X,
                                                      const FeasolveConfig& cfg, const Context& ctx,
                                                      Prediction* prediction = nullptr) {
  const std::size_t n = f.space().dim();
  TargetEvaluation out;
  out.grad = MatrixXd::Zero(static_cast<Eigen::Index>(X.size()), static_cast<Eigen::Index>(n));
  if (target == Target::distance) {
    MatrixXd Xn(out.grad.rows(), out.grad.cols());
    for (std::size_t i = 0; i < X.size(); ++i) {
      const Point xn = normalize_inputs(X[i], f.space());
      for (std::size_t j = 0; j < n; ++j) Xn(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xn[j];
    }
    MatrixXd g;
    out.loss = loss_distance(Xn, ctx.train_inputs, &g);
    for (std::size_t j = 0; j < n; ++j) out.grad.col(static_cast<Eigen::Index>(j)) = g.col(static_cast<Eigen::Index>(j)) / f.space().width(j);
    if (prediction) *prediction = f.predict(X);
    return out;
  }
  const Prediction pred = f.predict(X);
  MatrixXd dY, dC;
  switch (target) {
    case Target::objective:
      if (f.objective_outputs() == 0) return out;
      out.loss = loss_objective(pred.Y, ctx.train_max, cfg.reference_factor, &dY);
      break;
    case Target::constraint:
      if (f.constraint_outputs() == 0) return out;
      out.loss = loss_constraint(pred.C, cfg.focal_gamma, cfg.focal_alpha, &dC);
      break;
    case Target::zero:
      if (f.objective_outputs() == 0) return out;
      out.loss = loss_zero(pred.Y, &dY);
      break;
    case Target::distance: break;
  }
  out.grad = to_matrix(f.vjp(X, dY, dC));
  if (prediction) *prediction = pred;
  return out;
}

struct CompositeEvaluation {
  double loss = 0.0;  // sum of the raw (unbalanced) losses
  MatrixXd grad;      // balanced
  Prediction prediction;
};

[[nodiscard]] inline CompositeEvaluation evaluate_composite(const JointSurrogate& f, const std::vector<Point>& X,
                                                            const FeasolveConfig& cfg, const Context& ctx) {
  CompositeEvaluation out;
  std::vector<MatrixXd> grads;
  for (std::size_t t = 0; t < cfg.targets.size(); ++t) {
    auto e = evaluate_target(cfg.targets[t], f, X, cfg, ctx, t == 0 ? &out.prediction : nullptr);
    out.loss += e.loss;
    grads.push_back(std::move(e.grad));
  }
  out.grad = balance_gradients(grads);
  return out;
}

/// IQR / |median| of `losses` (linear-interpolated quartiles) at or below
/// `ratio`.
[[nodiscard]] inline bool plateaued(std::span<const double> losses, double ratio) {
  std::vector<double> s(losses.begin(), losses.end());
  std::sort(s.begin(), s.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  return iqr <= ratio * std::abs(quantile(0.5));
}

struct TraceStep {
  std::size_t step = 0;
  std::vector<Point> candidates;
  std::vector<ObjectiveVector> predicted_objectives;
  std::vector<std::vector<double>> predicted_feasibility;
  double loss = 0.0;
};

struct DescentTrace {
  std::vector<TraceStep> steps;
};

struct FeasolveResult {
  std::vector<Point> candidates;
  DescentTrace trace;
  std::size_t steps = 0;
  bool terminated_early = false;
  bool aborted = false;
};

/// Gradient descent on candidate parameters against the frozen surrogate.
/// The trace holds the state before every update plus the final state.
[[nodiscard]] inline FeasolveResult make_feasible(std::vector<Point> X, const JointSurrogate& f,
                                                  const FeasolveConfig& cfg, const Context& ctx) {
  cfg.validate();
  FeasolveResult res;
  if (X.empty()) return res;
  const ParameterSpace& space = f.space();
  const Eigen::Index B = static_cast<Eigen::Index>(X.size());
  const Eigen::Index n = static_cast<Eigen::Index>(space.dim());
  MatrixXd m = MatrixXd::Zero(B, n), v = MatrixXd::Zero(B, n);
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-7;
  std::vector<double> losses;
  auto record = [&](const CompositeEvaluation& e) {
    res.trace.steps.push_back(
        {res.steps, X, e.prediction.objectives(), e.prediction.probabilities(), e.loss});
  };
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const auto e = evaluate_composite(f, X, cfg, ctx);
    if (!std::isfinite(e.loss) || !e.grad.allFinite()) {
      res.aborted = true;
      break;
    }
    record(e);
    if (cfg.uses_sgd()) {
      for (Eigen::Index i = 0; i < B; ++i)
        for (Eigen::Index j = 0; j < n; ++j) X[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= cfg.learning_rate * e.grad(i, j);
    } else {
      const double t = static_cast<double>(res.steps + 1);
      m = beta1 * m + (1.0 - beta1) * e.grad;
      v = beta2 * v + (1.0 - beta2) * e.grad.cwiseProduct(e.grad);
      const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
      for (Eigen::Index i = 0; i < B; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
          X[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -=
              cfg.learning_rate * (m(i, j) / c1) / (std::sqrt(v(i, j) / c2) + adam_eps);
    }
    for (auto& x : X) space.clip(x);
    ++res.steps;
    losses.push_back(e.loss);
    if (losses.size() >= cfg.plateau_window &&
        plateaued(std::span<const double>(losses).last(cfg.plateau_window), cfg.plateau_ratio)) {
      res.terminated_early = true;
      break;
    }
  }
  if (!res.aborted) {
    const auto e = evaluate_composite(f, X, cfg, ctx);
    if (std::isfinite(e.loss)) record(e);
  }
  res.candidates = std::move(X);
  return res;
}

struct SplitPopulation {
  std::vector<moea::Individual> elite;
  std::vector<moea::Individual> explore;
};

/// Top ceil(M/2) members of a rank-ordered population are kept untouched; the
/// rest are routed to feasibility solving.
[[nodiscard]] inline SplitPopulation hybrid_epoch_split(const moea::RankedPopulation& pop) {
  const auto order = moea::sorted_order(pop);
  const std::size_t elite = (pop.size() + 1) / 2;
  SplitPopulation s;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < elite ? s.elite : s.explore).push_back(pop.members[order[i]]);
  return s;
}

/// Keeps k mutually distant points. Values are min-max normalized per column,
/// then the point whose nearest remaining neighbour is closest is removed
/// repeatedly (earlier index first on ties). Returns kept indices, ascending.
[[nodiscard]] inline std::vector<std::size_t> trace_diversity_filter(const std::vector<std::vector<double>>& values,
                                                                     std::size_t k) {
  const std::size_t N = values.size();
  std::vector<std::size_t> all(N);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (k >= N) return all;
  const std::size_t d = N ? values.front().size() : 0;
  std::vector<std::vector<double>> v = values;
  for (std::size_t j = 0; j < d; ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : v) {
      lo = std::min(lo, row[j]);
      hi = std::max(hi, row[j]);
    }
    for (auto& row : v) row[j] = hi > lo ? (row[j] - lo) / (hi - lo) : 0.0;
  }
  std::vector<double> dist(N * N, 0.0);
  for (std::size_t a = 0; a < N; ++a)
    for (std::size_t b = a + 1; b < N; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (v[a][j] - v[b][j]) * (v[a][j] - v[b][j]);
      dist[a * N + b] = dist[b * N + a] = std::sqrt(s);
    }
  std::vector<bool> alive(N, true);
  std::vector<double> nearest(N, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> nearest_idx(N, N);
  auto refresh = [&](std::size_t a) {
    nearest[a] = std::numeric_limits<double>::infinity();
    nearest_idx[a] = N;
    for (std::size_t b = 0; b < N; ++b)
      if (b != a && alive[b] && dist[a * N + b] < nearest[a]) {
        nearest[a] = dist[a * N + b];
        nearest_idx[a] = b;
      }
  };
  for (std::size_t a = 0; a < N; ++a) refresh(a);
  for (std::size_t remaining = N; remaining > k; --remaining) {
    std::size_t victim = N;
    for (std::size_t a = 0; a < N; ++a)
      if (alive[a] && (victim == N || nearest[a] < nearest[victim])) victim = a;
    alive[victim] = false;
    for (std::size_t a = 0; a < N; ++a)
      if (alive[a] && nearest_idx[a] == victim) refresh(a);
  }
  std::vector<std::size_t> kept;
  for (std::size_t a = 0; a < N; ++a)
    if (alive[a]) kept.push_back(a);
  return kept;
}

}  // namespace surropt::feasolve
