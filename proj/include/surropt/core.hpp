#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "surropt/random.hpp"

namespace surropt {

/// Surrogate training churns through matrices of a few hundred kilobytes,
/// which glibc would otherwise map and unmap on every allocation. Call once
/// at program start; a no-op elsewhere.
inline void prefer_heap_allocations() noexcept {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 64 << 20);
#endif
}

using Point = std::vector<double>;
using ObjectiveVector = std::vector<double>;
/// Binary constraint outcomes; 1 = satisfied.
using ConstraintVector = std::vector<std::uint8_t>;

/// Bounded box [lower, upper] with one name per dimension.
class ParameterSpace {
 public:
  ParameterSpace() = default;

  ParameterSpace(std::vector<std::string> names, Point lower, Point upper)
      : names_(std::move(names)), lower_(std::move(lower)), upper_(std::move(upper)) {
    if (names_.empty()) throw std::invalid_argument("parameter space needs at least one dimension");
    if (names_.size() != lower_.size() || names_.size() != upper_.size())
      throw std::invalid_argument("parameter space: names/lower/upper length mismatch");
    std::set<std::string> seen;
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (!seen.insert(names_[j]).second)
        throw std::invalid_argument("parameter space: duplicate name '" + names_[j] + "'");
      if (!(lower_[j] < upper_[j]))
        throw std::invalid_argument("parameter space: dimension '" + names_[j] +
                                    "' needs lower < upper");
    }
  }

  /// Dimensions named x1..xn sharing the same bounds.
  static ParameterSpace uniform(std::size_t n, double lo, double hi) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < n; ++j) names.push_back("x" + std::to_string(j + 1));
    return {std::move(names), Point(n, lo), Point(n, hi)};
  }

  [[nodiscard]] std::size_t dim() const noexcept { return lower_.size(); }
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }
  [[nodiscard]] const Point& lower() const noexcept { return lower_; }
  [[nodiscard]] const Point& upper() const noexcept { return upper_; }
  [[nodiscard]] double width(std::size_t j) const noexcept { return upper_[j] - lower_[j]; }

  [[nodiscard]] bool contains(std::span<const double> x) const noexcept {
    if (x.size() != dim()) return false;
    for (std::size_t j = 0; j < dim(); ++j)
      if (!(x[j] >= lower_[j] && x[j] <= upper_[j])) return false;
    return true;
  }

  void clip(std::span<double> x) const noexcept {
    for (std::size_t j = 0; j < dim(); ++j) x[j] = std::clamp(x[j], lower_[j], upper_[j]);
  }

  [[nodiscard]] Point center() const {
    Point c(dim());
    for (std::size_t j = 0; j < dim(); ++j) c[j] = 0.5 * (lower_[j] + upper_[j]);
    return c;
  }

 private:
  std::vector<std::string> names_;
  Point lower_;
  Point upper_;
};

[[nodiscard]] inline bool is_feasible(std::span<const std::uint8_t> c) noexcept {
  return std::all_of(c.begin(), c.end(), [](std::uint8_t f) { return f == 1; });
}

[[nodiscard]] inline bool has_nan(std::span<const double> v) noexcept {
  return std::any_of(v.begin(), v.end(), [](double x) { return std::isnan(x); });
}

/// Pareto dominance for minimization: a <= b everywhere and a < b somewhere.
[[nodiscard]] inline bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dominates: length mismatch");
  bool strict = false;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (std::isnan(a[j]) || std::isnan(b[j])) throw std::invalid_argument("dominates: NaN objective");
    if (a[j] > b[j]) return false;
    if (a[j] < b[j]) strict = true;
  }
  return strict;
}

enum class Provenance { init, moea, feasolve, trace };

[[nodiscard]] inline std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::init: return "init";
    case Provenance::moea: return "moea";
    case Provenance::feasolve: return "feasolve";
    case Provenance::trace: return "trace";
  }
  return "init";
}

[[nodiscard]] inline Provenance provenance_from_string(std::string_view s) {
  if (s == "init") return Provenance::init;
  if (s == "moea") return Provenance::moea;
  if (s == "feasolve") return Provenance::feasolve;
  if (s == "trace") return Provenance::trace;
  throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

/// One true evaluation of the problem.
struct EvaluationRecord {
  Point params;
  ObjectiveVector objectives;
  ConstraintVector constraints;
  std::size_t epoch = 0;
  Provenance provenance = Provenance::init;

  [[nodiscard]] bool feasible() const noexcept { return is_feasible(constraints); }
  [[nodiscard]] bool viable() const noexcept { return !has_nan(objectives); }

  bool operator==(const EvaluationRecord&) const = default;
};

struct Population {
  std::vector<Point> members;

  [[nodiscard]] std::size_t size() const noexcept { return members.size(); }
};

enum class ArchiveInsert { inserted, dominated, duplicate, infeasible, non_viable };

/// Cumulative non-dominated set of feasible, viable records.
class ParetoArchive {
 public:
  ArchiveInsert insert(const EvaluationRecord& rec) {
    if (!rec.feasible()) return ArchiveInsert::infeasible;
    if (!rec.viable()) return ArchiveInsert::non_viable;
    for (const auto& m : records_) {
      if (dominates(m.objectives, rec.objectives)) return ArchiveInsert::dominated;
      if (m.objectives == rec.objectives && m.params == rec.params) return ArchiveInsert::duplicate;
    }
    std::erase_if(records_, [&](const EvaluationRecord& m) { return dominates(rec.objectives, m.objectives); });
    records_.push_back(rec);
    return ArchiveInsert::inserted;
  }

  [[nodiscard]] const std::vector<EvaluationRecord>& records() const noexcept { return records_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }
  [[nodiscard]] bool empty() const noexcept { return records_.empty(); }

  [[nodiscard]] std::vector<ObjectiveVector> front() const {
    std::vector<ObjectiveVector> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.objectives);
    return out;
  }

 private:
  std::vector<EvaluationRecord> records_;
};

/// Per-epoch snapshot kept alongside the evaluation log.
struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t cumulative_evals = 0;
  double hv_norm = 0.0;
  std::size_t feasible_count = 0;
  double nrmse = std::nan("");
  std::string mode;
  std::size_t feasolve_steps = 0;
  double wall_seconds = 0.0;
  /// Additive epsilon of the previous archive against the current one, in
  /// normalized objective space. Not persisted.
  double ecov = std::nan("");
};

/// Append-only record log plus per-epoch metrics.
class RunHistory {
 public:
  void append(EvaluationRecord rec) {
    std::lock_guard lock(mutex_);
    if (!records_.empty() && rec.epoch < records_.back().epoch)
      throw std::logic_error("run history: epochs must be non-decreasing");
    records_.push_back(std::move(rec));
  }

  void append_metrics(EpochMetrics m) {
    std::lock_guard lock(mutex_);
    if (!metrics_.empty() && m.epoch <= metrics_.back().epoch)
      throw std::logic_error("run history: metric epochs must increase");
    metrics_.push_back(std::move(m));
  }

  /// Rewrites hv_norm once the run-wide normalization is known.
  void set_hv_norm(std::size_t i, double hv) {
    std::lock_guard lock(mutex_);
    metrics_.at(i).hv_norm = hv;
  }

  [[nodiscard]] const std::vector<EvaluationRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const std::vector<EpochMetrics>& metrics() const noexcept { return metrics_; }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }

  RunHistory() = default;
  RunHistory(const RunHistory& o) : records_(o.records_), metrics_(o.metrics_) {}
  RunHistory& operator=(const RunHistory& o) {
    if (this != &o) {
      records_ = o.records_;
      metrics_ = o.metrics_;
    }
    return *this;
  }

 private:
  std::vector<EvaluationRecord> records_;
  std::vector<EpochMetrics> metrics_;
  std::mutex mutex_;
};

/// Archive rebuilt from scratch over a record sequence.
[[nodiscard]] inline ParetoArchive archive_of(std::span<const EvaluationRecord> records) {
  ParetoArchive a;
  for (const auto& r : records) a.insert(r);
  return a;
}

}  // namespace surropt
