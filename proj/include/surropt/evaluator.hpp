#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/problems.hpp"

namespace surropt {

struct EvaluationRequest {
  std::size_t batch = 0;
  std::size_t index = 0;
  Point params;
};

struct EvaluationResult {
  std::size_t batch = 0;
  std::size_t index = 0;
  ObjectiveVector objectives;
  ConstraintVector constraints;
  double wall_seconds = 0.0;
  std::size_t worker = 0;
  std::size_t attempts = 0;
  /// Empty on success; the last failure message otherwise.
  std::string error;

  [[nodiscard]] bool failed() const noexcept { return !error.empty(); }
};

namespace detail {

inline EvaluationResult evaluate_one(const ProblemDefinition& problem, const EvaluationRequest& req,
                                     std::size_t worker) {
  EvaluationResult r;
  r.batch = req.batch;
  r.index = req.index;
  r.worker = worker;
  const auto t0 = std::chrono::steady_clock::now();
  for (int attempt = 0; attempt < 2; ++attempt) {
    ++r.attempts;
    try {
      Evaluation e = problem.evaluate(req.params);
      if (e.objectives.size() != problem.q || e.constraints.size() != problem.k)
        throw std::runtime_error("evaluation returned wrong output sizes");
      r.objectives = std::move(e.objectives);
      r.constraints = std::move(e.constraints);
      r.error.clear();
      break;
    } catch (const std::exception& ex) {
      r.error = ex.what();
    } catch (...) {
      r.error = "unknown failure";
    }
  }
  if (r.failed()) {
    r.objectives.assign(problem.q, std::numeric_limits<double>::quiet_NaN());
    r.constraints.assign(problem.k, 0);
  }
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

/// Evaluates every point exactly once on `workers` threads. Results come back
/// in candidate order whatever the scheduling; a candidate that throws is
/// retried once and then reported with NaN objectives.
[[nodiscard]] inline std::vector<EvaluationResult> evaluate_batch(const ProblemDefinition& problem,
                                                                  const std::vector<Point>& points,
                                                                  std::size_t workers, std::size_t batch_id = 0) {
  if (workers < 1) throw std::invalid_argument("evaluate_batch: workers must be >= 1");
  std::vector<EvaluationResult> results(points.size());
  if (points.empty()) return results;
  std::atomic<std::size_t> next{0};
  auto work = [&](std::size_t worker) {
    for (std::size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1))
      results[i] = detail::evaluate_one(problem, {batch_id, i, points[i]}, worker);
  };
  const std::size_t threads = std::min(workers, points.size());
  if (threads == 1) {
    work(0);
    return results;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
  pool.clear();
  return results;
}

}  // namespace surropt
