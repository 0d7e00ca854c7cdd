#pragma once

#include <boost/random/sobol.hpp>

#include <cstddef>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surropt/core.hpp"

namespace surropt {

enum class SamplingScheme { slhc, lhc, mc, sobol };

[[nodiscard]] inline std::string_view to_string(SamplingScheme s) noexcept {
  switch (s) {
    case SamplingScheme::slhc: return "slhc";
    case SamplingScheme::lhc: return "lhc";
    case SamplingScheme::mc: return "mc";
    case SamplingScheme::sobol: return "sobol";
  }
  return "slhc";
}

[[nodiscard]] inline SamplingScheme sampling_scheme_from_string(std::string_view s) {
  if (s == "slhc") return SamplingScheme::slhc;
  if (s == "lhc") return SamplingScheme::lhc;
  if (s == "mc") return SamplingScheme::mc;
  if (s == "sobol") return SamplingScheme::sobol;
  throw std::invalid_argument("unknown sampler '" + std::string(s) + "' (slhc, lhc, mc, sobol)");
}

struct DesignMatrix {
  std::vector<Point> points;
  SamplingScheme scheme = SamplingScheme::slhc;
};

namespace detail {

inline Point scale_to(const ParameterSpace& space, const Point& unit) {
  Point x(space.dim());
  for (std::size_t j = 0; j < space.dim(); ++j) x[j] = space.lower()[j] + space.width(j) * unit[j];
  return x;
}

}  // namespace detail

/// Symmetric Latin hypercube. Each 1-D projection holds one point per stratum
/// and points come in center-mirrored pairs: the partner of a point in stratum s
/// with jitter u sits in stratum N-1-s with jitter 1-u.
[[nodiscard]] inline DesignMatrix sample_slhc(const ParameterSpace& space, std::size_t N, RandomStream& rng) {
  if (N < 2 || N % 2 != 0)
    throw std::invalid_argument("symmetric Latin hypercube needs an even sample count >= 2; got " +
                                std::to_string(N) + ", use " + std::to_string(N < 2 ? 2 : N + 1));
  const std::size_t n = space.dim();
  const std::size_t half = N / 2;
  std::vector<Point> unit(N, Point(n));
  std::vector<std::size_t> strata(half);
  for (std::size_t j = 0; j < n; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata.begin(), strata.end());
    for (std::size_t i = 0; i < half; ++i) {
      std::size_t s = strata[i];
      if (rng.coin()) s = N - 1 - s;
      const double u = rng.uniform();
      unit[i][j] = (static_cast<double>(s) + u) / static_cast<double>(N);
      unit[half + i][j] = (static_cast<double>(N - 1 - s) + (1.0 - u)) / static_cast<double>(N);
    }
  }
  DesignMatrix d{.points = {}, .scheme = SamplingScheme::slhc};
  d.points.reserve(N);
  for (const auto& u : unit) d.points.push_back(detail::scale_to(space, u));
  return d;
}

[[nodiscard]] inline DesignMatrix sample_lhc(const ParameterSpace& space, std::size_t N, RandomStream& rng) {
  if (N < 1) throw std::invalid_argument("Latin hypercube needs N >= 1");
  const std::size_t n = space.dim();
  std::vector<Point> unit(N, Point(n));
  std::vector<std::size_t> strata(N);
  for (std::size_t j = 0; j < n; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata.begin(), strata.end());
    for (std::size_t i = 0; i < N; ++i)
      unit[i][j] = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(N);
  }
  DesignMatrix d{.points = {}, .scheme = SamplingScheme::lhc};
  for (const auto& u : unit) d.points.push_back(detail::scale_to(space, u));
  return d;
}

[[nodiscard]] inline DesignMatrix sample_mc(const ParameterSpace& space, std::size_t N, RandomStream& rng) {
  if (N < 1) throw std::invalid_argument("Monte Carlo sampling needs N >= 1");
  DesignMatrix d{.points = {}, .scheme = SamplingScheme::mc};
  Point u(space.dim());
  for (std::size_t i = 0; i < N; ++i) {
    for (auto& v : u) v = rng.uniform();
    d.points.push_back(detail::scale_to(space, u));
  }
  return d;
}

inline constexpr std::size_t kMaxSobolDim = 64;

/// First N points of the unscrambled base-2 Sobol sequence, origin included.
/// Above kMaxSobolDim dimensions this falls back to a Latin hypercube.
[[nodiscard]] inline DesignMatrix sample_sobol(const ParameterSpace& space, std::size_t N, RandomStream& rng) {
  if (N < 1) throw std::invalid_argument("Sobol sampling needs N >= 1");
  const std::size_t n = space.dim();
  if (n > kMaxSobolDim) {
    std::cerr << "warning: Sobol sampling supports at most " << kMaxSobolDim
              << " dimensions; falling back to Latin hypercube\n";
    return sample_lhc(space, N, rng);
  }
  DesignMatrix d{.points = {}, .scheme = SamplingScheme::sobol};
  d.points.push_back(space.lower());
  boost::random::sobol gen(n);
  const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
  Point u(n);
  for (std::size_t i = 1; i < N; ++i) {
    for (auto& v : u) v = static_cast<double>(gen()) * scale;
    d.points.push_back(detail::scale_to(space, u));
  }
  return d;
}

[[nodiscard]] inline DesignMatrix sample(SamplingScheme scheme, const ParameterSpace& space, std::size_t N,
                                         RandomStream& rng) {
  switch (scheme) {
    case SamplingScheme::slhc: return sample_slhc(space, N, rng);
    case SamplingScheme::lhc: return sample_lhc(space, N, rng);
    case SamplingScheme::mc: return sample_mc(space, N, rng);
    case SamplingScheme::sobol: return sample_sobol(space, N, rng);
  }
  return sample_slhc(space, N, rng);
}

}  // namespace surropt
