#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "surropt/surrogate.hpp"

namespace surropt::testing {

/// Small ResNet with perturbed layer norms and random output scaling.
inline JointSurrogate random_model(std::uint64_t seed, std::size_t n, std::size_t q, std::size_t k,
                                   SurrogateMode mode = SurrogateMode::co) {
  RandomStream rng(seed, "model");
  SurrogateConfig cfg;
  cfg.mode = mode;
  cfg.block_dim = 8;
  cfg.blocks = 2;
  const ParameterSpace space = ParameterSpace::uniform(n, -1.0, 3.0);
  std::vector<ObjectiveVector> Y;
  for (int i = 0; i < 10; ++i) {
    ObjectiveVector y(q);
    for (auto& v : y) v = rng.uniform(0.0, 5.0);
    Y.push_back(y);
  }
  nn::Network net(JointSurrogate::architecture_for(cfg, n, q, k), rng);
  for (auto& p : net.params())
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += 0.3 * rng.normal();
  return JointSurrogate(cfg, space, q, k, OutputNormalizer::fit(Y), std::move(net));
}

/// Exact affine model in raw units: objectives A x + a, constraint logits W x + w.
inline JointSurrogate linear_model(const ParameterSpace& space, const Eigen::MatrixXd& A, const Eigen::VectorXd& a,
                                   const Eigen::MatrixXd& W, const Eigen::VectorXd& w) {
  const std::size_t n = space.dim(), q = static_cast<std::size_t>(A.rows()), k = static_cast<std::size_t>(W.rows());
  SurrogateConfig cfg;
  cfg.mode = q == 0 ? SurrogateMode::c : (k == 0 ? SurrogateMode::o : SurrogateMode::co);
  cfg.blocks = 0;
  cfg.block_dim = n;
  cfg.final_norm = false;
  cfg.output_scaling = OutputScaling::none;
  const auto arch = JointSurrogate::architecture_for(cfg, n, q, k);
  Eigen::MatrixXd Win = Eigen::MatrixXd::Zero(n, n), bin(n, 1);
  for (std::size_t j = 0; j < n; ++j) {
    Win(j, j) = space.width(j);
    bin(j, 0) = space.lower()[j];
  }
  Eigen::MatrixXd Wout(q + k, n), bout(q + k, 1);
  if (q) {
    Wout.topRows(q) = A;
    bout.topRows(q) = a;
  }
  if (k) {
    Wout.bottomRows(k) = W;
    bout.bottomRows(k) = w;
  }
  OutputNormalizer norm;
  norm.scaling = OutputScaling::none;
  norm.y_min.assign(q, 0.0);
  norm.y_max.assign(q, 1.0);
  return JointSurrogate(cfg, space, q, k, norm, nn::Network(arch, {Win, bin, Wout, bout}));
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace surropt::testing
