#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "surropt/core.hpp"

namespace surropt::metrics {

using Front = std::vector<ObjectiveVector>;

inline constexpr std::size_t kMaxExactHvObjectives = 6;

namespace detail {

// Points are assumed clipped to ref. Uses the first `d` coordinates.
inline double hv_recursive(std::vector<const double*> pts, const double* ref, std::size_t d) {
  if (pts.empty()) return 0.0;
  if (d == 1) {
    double lo = ref[0];
    for (const double* p : pts) lo = std::min(lo, p[0]);
    return ref[0] - lo;
  }
  if (d == 2) {
    std::sort(pts.begin(), pts.end(), [](const double* a, const double* b) {
      return a[0] < b[0] || (a[0] == b[0] && a[1] < b[1]);
    });
    double vol = 0.0;
    double best = ref[1];
    for (const double* p : pts) {
      if (p[1] < best) {
        vol += (ref[0] - p[0]) * (best - p[1]);
        best = p[1];
      }
    }
    return vol;
  }
  // Slice along the last coordinate; each slab's cross-section is the
  // (d-1)-dimensional volume of the points below it.
  std::sort(pts.begin(), pts.end(), [d](const double* a, const double* b) { return a[d - 1] < b[d - 1]; });
  double vol = 0.0;
  std::vector<const double*> slab;
  slab.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double* p = pts[i];
    // Keep the slab set mutually non-dominated in the first d-1 coordinates.
    bool dominated = false;
    for (const double* s : slab) {
      bool all_le = true;
      for (std::size_t j = 0; j + 1 < d; ++j)
        if (s[j] > p[j]) {
          all_le = false;
          break;
        }
      if (all_le) {
        dominated = true;
        break;
      }
    }
    if (!dominated) {
      std::erase_if(slab, [&](const double* s) {
        for (std::size_t j = 0; j + 1 < d; ++j)
          if (p[j] > s[j]) return false;
        return true;
      });
      slab.push_back(p);
    }
    const double top = (i + 1 < pts.size()) ? pts[i + 1][d - 1] : ref[d - 1];
    const double height = top - p[d - 1];
    if (height > 0.0) vol += hv_recursive(slab, ref, d - 1) * height;
  }
  return vol;
}

}  // namespace detail

/// Exact hypervolume dominated by `front` with respect to `ref` (minimization).
/// Coordinates beyond the reference are clipped to it first.
[[nodiscard]] inline double hypervolume(const Front& front, std::span<const double> ref) {
  if (front.empty()) return 0.0;
  const std::size_t q = ref.size();
  if (q == 0 || q > kMaxExactHvObjectives)
    throw std::invalid_argument("hypervolume: exact computation supports 1..6 objectives");
  std::vector<double> storage;
  storage.reserve(front.size() * q);
  for (const auto& p : front) {
    if (p.size() != q) throw std::invalid_argument("hypervolume: dimension mismatch");
    if (has_nan(p)) throw std::invalid_argument("hypervolume: NaN objective");
    for (std::size_t j = 0; j < q; ++j) storage.push_back(std::min(p[j], ref[j]));
  }
  std::vector<const double*> pts;
  for (std::size_t i = 0; i < front.size(); ++i) pts.push_back(storage.data() + i * q);
  return detail::hv_recursive(std::move(pts), ref.data(), q);
}

/// Shared normalization: objectives are shifted by `shift` and divided by
/// `nadir`; the reference point is 1.1 in every normalized coordinate.
struct NormalizationContext {
  std::vector<double> shift;
  std::vector<double> nadir;
  double reference_factor = 1.1;

  [[nodiscard]] ObjectiveVector apply(std::span<const double> y) const {
    ObjectiveVector out(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) out[j] = (y[j] - shift[j]) / nadir[j];
    return out;
  }

  [[nodiscard]] Front apply(const Front& f) const {
    Front out;
    out.reserve(f.size());
    for (const auto& y : f) out.push_back(apply(y));
    return out;
  }
};

/// Component-wise maximum over every supplied front. Objectives with negative
/// values are shifted by their minimum first; a degenerate (zero) nadir
/// component is replaced by 1.
[[nodiscard]] inline NormalizationContext make_normalization(std::span<const Front> fronts) {
  std::size_t q = 0;
  for (const auto& f : fronts)
    for (const auto& p : f) {
      if (q == 0) q = p.size();
      if (p.size() != q) throw std::invalid_argument("normalization: mismatched objective counts");
    }
  if (q == 0) throw std::invalid_argument("normalization: no points");
  std::vector<double> lo(q, std::numeric_limits<double>::infinity());
  std::vector<double> hi(q, -std::numeric_limits<double>::infinity());
  for (const auto& f : fronts)
    for (const auto& p : f) {
      if (has_nan(p)) continue;
      for (std::size_t j = 0; j < q; ++j) {
        lo[j] = std::min(lo[j], p[j]);
        hi[j] = std::max(hi[j], p[j]);
      }
    }
  NormalizationContext ctx;
  ctx.shift.assign(q, 0.0);
  ctx.nadir.assign(q, 1.0);
  for (std::size_t j = 0; j < q; ++j) {
    if (!std::isfinite(lo[j])) continue;
    if (lo[j] < 0.0 || hi[j] <= 0.0) ctx.shift[j] = lo[j];
    const double nad = hi[j] - ctx.shift[j];
    ctx.nadir[j] = nad > 0.0 ? nad : 1.0;
  }
  return ctx;
}

[[nodiscard]] inline double normalized_hypervolume(const Front& front, const NormalizationContext& ctx) {
  if (front.empty()) return 0.0;
  const std::vector<double> ref(ctx.nadir.size(), ctx.reference_factor);
  return hypervolume(ctx.apply(front), ref);
}

/// Normalized HV per method under one shared nadir.
[[nodiscard]] inline std::vector<double> normalized_hypervolume(std::span<const Front> fronts) {
  const auto ctx = make_normalization(fronts);
  std::vector<double> out;
  for (const auto& f : fronts) out.push_back(normalized_hypervolume(f, ctx));
  return out;
}

/// Trapezoidal area under a per-epoch series with unit spacing.
[[nodiscard]] inline double hv_auc(std::span<const double> series) {
  if (series.size() < 2) throw std::invalid_argument("hv_auc: need at least two epochs");
  double area = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) area += 0.5 * (series[i - 1] + series[i]);
  return area;
}

[[nodiscard]] inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Mean distance from each reference point to its nearest approximation point.
[[nodiscard]] inline double igd(const Front& A, const Front& R) {
  if (A.empty() || R.empty()) throw std::invalid_argument("igd: empty front");
  double total = 0.0;
  for (const auto& r : R) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : A) best = std::min(best, euclidean(a, r));
    total += best;
  }
  return total / static_cast<double>(R.size());
}

/// Smallest uniform shift of A that weakly dominates every point of B.
[[nodiscard]] inline double epsilon_additive(const Front& A, const Front& B) {
  if (A.empty() || B.empty()) throw std::invalid_argument("epsilon_additive: empty front");
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& b : B) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& a : A) {
      double shift = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < b.size(); ++j) shift = std::max(shift, a[j] - b[j]);
      best = std::min(best, shift);
    }
    worst = std::max(worst, best);
  }
  return worst;
}

[[nodiscard]] inline bool weakly_dominates(std::span<const double> a, std::span<const double> b) noexcept {
  for (std::size_t j = 0; j < a.size(); ++j)
    if (a[j] > b[j]) return false;
  return true;
}

/// Fraction of B weakly dominated (equality included) by some point of A.
[[nodiscard]] inline double set_coverage(const Front& A, const Front& B) {
  if (B.empty()) throw std::invalid_argument("set_coverage: empty B");
  std::size_t covered = 0;
  for (const auto& b : B)
    if (std::any_of(A.begin(), A.end(), [&](const auto& a) { return weakly_dominates(a, b); })) ++covered;
  return static_cast<double>(covered) / static_cast<double>(B.size());
}

/// Mean over objectives of RMSE divided by the true value range. Zero-range
/// objectives are skipped with a warning; NaN when none remain.
[[nodiscard]] inline double nrmse(const std::vector<ObjectiveVector>& Y, const std::vector<ObjectiveVector>& Yhat) {
  if (Y.size() != Yhat.size()) throw std::invalid_argument("nrmse: row count mismatch");
  if (Y.size() < 2) throw std::invalid_argument("nrmse: need at least two rows");
  const std::size_t q = Y.front().size();
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < q; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sq = 0.0;
    for (std::size_t i = 0; i < Y.size(); ++i) {
      lo = std::min(lo, Y[i][j]);
      hi = std::max(hi, Y[i][j]);
      const double d = Y[i][j] - Yhat[i][j];
      sq += d * d;
    }
    if (!(hi > lo)) {
      std::cerr << "warning: nrmse: objective " << j << " has zero range; excluded\n";
      continue;
    }
    sum += std::sqrt(sq / static_cast<double>(Y.size())) / (hi - lo);
    ++used;
  }
  return used == 0 ? std::nan("") : sum / static_cast<double>(used);
}

/// Mutually non-dominated subset (first occurrence kept for exact duplicates).
[[nodiscard]] inline Front nondominated(const Front& pts) {
  Front out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool keep = true;
    for (std::size_t k = 0; k < pts.size() && keep; ++k) {
      if (k == i) continue;
      if (dominates(pts[k], pts[i])) keep = false;
      if (k < i && pts[k] == pts[i]) keep = false;
    }
    if (keep) out.push_back(pts[i]);
  }
  return out;
}

}  // namespace surropt::metrics
