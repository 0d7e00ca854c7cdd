#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/moea.hpp"
#include "surropt/surrogate.hpp"

namespace surropt {

struct SensitivityIndices {
  /// Mean absolute elasticity per parameter.
  std::vector<double> S_bar;
};

inline constexpr std::size_t kSensitivityBatch = 1024;

/// Mean |dy_k/dx_j * x_j| over X. With no objective index the elasticities
/// of all objective outputs are averaged; a constraint-only model falls back
/// to its constraint outputs.
[[nodiscard]] inline SensitivityIndices compute_elasticities(const JointSurrogate& f, const std::vector<Point>& X,
                                                             std::optional<std::size_t> objective_index = std::nullopt) {
  if (X.empty()) throw std::invalid_argument("compute_elasticities: no inputs");
  const std::size_t n = f.space().dim();
  const bool use_objectives = f.objective_outputs() > 0;
  const std::size_t outputs = use_objectives ? f.objective_outputs() : f.constraint_outputs();
  if (outputs == 0) throw std::invalid_argument("compute_elasticities: model has no outputs");
  std::vector<std::size_t> heads;
  if (objective_index) {
    if (*objective_index >= outputs) throw std::out_of_range("compute_elasticities: objective index");
    heads.push_back(*objective_index);
  } else {
    for (std::size_t k = 0; k < outputs; ++k) heads.push_back(k);
  }

  std::vector<double> sum(n, 0.0);
  for (std::size_t start = 0; start < X.size(); start += kSensitivityBatch) {
    const std::size_t end = std::min(X.size(), start + kSensitivityBatch);
    const std::vector<Point> batch(X.begin() + static_cast<std::ptrdiff_t>(start),
                                   X.begin() + static_cast<std::ptrdiff_t>(end));
    const auto B = static_cast<Eigen::Index>(batch.size());
    for (const std::size_t k : heads) {
      Eigen::MatrixXd dY, dC;
      Eigen::MatrixXd& d = use_objectives ? dY : dC;
      d = Eigen::MatrixXd::Zero(B, static_cast<Eigen::Index>(use_objectives ? f.q() : f.k()));
      d.col(static_cast<Eigen::Index>(k)).setOnes();
      const auto g = f.vjp(batch, dY, dC);
      for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) sum[j] += std::abs(g[i][j] * batch[i][j]);
    }
  }
  const double denom = static_cast<double>(X.size()) * static_cast<double>(heads.size());
  for (auto& s : sum) s /= denom;
  return {sum};
}

/// eta_j = clip(1 + 20 S_j, 1, 30) for both crossover and mutation.
[[nodiscard]] inline moea::DistributionIndices indices_from_sensitivity(const SensitivityIndices& S) {
  moea::DistributionIndices eta;
  for (const double s : S.S_bar) {
    const double e = std::clamp(1.0 + 20.0 * std::abs(s), moea::kMinEta, moea::kMaxEta);
    eta.eta_cross.push_back(e);
    eta.eta_mut.push_back(e);
  }
  return eta;
}

/// eta_j -> clip(21 - eta_j, 1, 30).
[[nodiscard]] inline moea::DistributionIndices invert_indices(const moea::DistributionIndices& eta) {
  auto flip = [](double e) { return std::clamp(21.0 - e, moea::kMinEta, moea::kMaxEta); };
  moea::DistributionIndices out;
  for (const double e : eta.eta_cross) out.eta_cross.push_back(flip(e));
  for (const double e : eta.eta_mut) out.eta_mut.push_back(flip(e));
  return out;
}

}  // namespace surropt
