#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surropt/random.hpp"

namespace surropt::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { smooth, relu };

[[nodiscard]] inline std::string_view to_string(Activation a) noexcept {
  return a == Activation::relu ? "relu" : "smooth";
}

[[nodiscard]] inline Activation activation_from_string(std::string_view s) {
  if (s == "smooth" || s == "softplus") return Activation::smooth;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + std::string(s) + "' (smooth, relu)");
}

struct Architecture {
  std::size_t inputs = 1;
  std::size_t outputs = 1;
  std::size_t blocks = 2;
  std::size_t block_dim = 192;
  double hidden_multiplier = 2.0;
  double dropout1 = 0.15;
  double dropout2 = 0.0;
  Activation activation = Activation::smooth;
  bool final_norm = true;

  [[nodiscard]] std::size_t hidden_dim() const noexcept {
    const auto h = static_cast<std::size_t>(std::floor(hidden_multiplier * static_cast<double>(block_dim)));
    return h == 0 ? 1 : h;
  }
};

inline constexpr double kLayerNormEps = 1e-5;

namespace detail {

inline double softplus(double x) noexcept { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct LayerNormCache {
  MatrixXd xhat;
  VectorXd rstd;  // one per column
};

inline MatrixXd layer_norm(const MatrixXd& h, const MatrixXd& gain, const MatrixXd& bias, LayerNormCache* cache) {
  const auto d = static_cast<double>(h.rows());
  const Eigen::RowVectorXd mean = h.colwise().sum() / d;
  MatrixXd centered = h.rowwise() - mean;
  const Eigen::RowVectorXd var = centered.array().square().colwise().sum() / d;
  const Eigen::RowVectorXd rstd = (var.array() + kLayerNormEps).rsqrt();
  MatrixXd xhat = centered.array().rowwise() * rstd.array();
  MatrixXd out = (xhat.array().colwise() * gain.col(0).array()).colwise() + bias.col(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = rstd.transpose();
  }
  return out;
}

// Returns dL/dh and accumulates gain/bias gradients.
inline MatrixXd layer_norm_backward(const MatrixXd& dz, const MatrixXd& gain, const LayerNormCache& c,
                                    MatrixXd* dgain, MatrixXd* dbias) {
  const auto d = static_cast<double>(dz.rows());
  if (dgain) *dgain += (dz.array() * c.xhat.array()).rowwise().sum().matrix();
  if (dbias) *dbias += dz.rowwise().sum();
  const MatrixXd dxhat = dz.array().colwise() * gain.col(0).array();
  const Eigen::RowVectorXd m1 = dxhat.colwise().sum() / d;
  const Eigen::RowVectorXd m2 = (dxhat.array() * c.xhat.array()).colwise().sum() / d;
  MatrixXd dh = dxhat;
  dh.rowwise() -= m1;
  dh.array() -= c.xhat.array().rowwise() * m2.array();
  dh.array().rowwise() *= c.rstd.transpose().array();
  return dh;
}

}  // namespace detail

/// Residual MLP: input projection, residual blocks
/// h + Drop2(W2 Drop1(act(W1 LN(h) + b1)) + b2), optional final layer norm,
/// and one linear output layer. Inputs and outputs are column-batched.
class Network {
 public:
  Network() = default;

  Network(const Architecture& arch, RandomStream& rng) : arch_(arch) {
    const std::size_t d = arch.block_dim;
    const std::size_t h = arch.hidden_dim();
    params_.push_back(init(d, arch.inputs, arch.inputs, rng));  // W_in
    params_.push_back(init(d, 1, arch.inputs, rng));            // b_in
    for (std::size_t b = 0; b < arch.blocks; ++b) {
      params_.push_back(MatrixXd::Ones(d, 1));   // LN gain
      params_.push_back(MatrixXd::Zero(d, 1));   // LN bias
      params_.push_back(init(h, d, d, rng));     // W1
      params_.push_back(init(h, 1, d, rng));     // b1
      params_.push_back(init(d, h, h, rng));     // W2
      params_.push_back(init(d, 1, h, rng));     // b2
    }
    if (arch.final_norm) {
      params_.push_back(MatrixXd::Ones(d, 1));
      params_.push_back(MatrixXd::Zero(d, 1));
    }
    params_.push_back(init(arch.outputs, d, d, rng));  // W_out
    params_.push_back(init(arch.outputs, 1, d, rng));  // b_out
  }

  Network(const Architecture& arch, std::vector<MatrixXd> params) : arch_(arch), params_(std::move(params)) {
    if (params_.size() != expected_param_count()) throw std::invalid_argument("network: wrong parameter count");
  }

  [[nodiscard]] const Architecture& architecture() const noexcept { return arch_; }
  [[nodiscard]] const std::vector<MatrixXd>& params() const noexcept { return params_; }
  [[nodiscard]] std::vector<MatrixXd>& params() noexcept { return params_; }

  [[nodiscard]] std::size_t expected_param_count() const noexcept {
    return 4 + 6 * arch_.blocks + (arch_.final_norm ? 2 : 0);
  }

  struct BlockCache {
    detail::LayerNormCache ln;
    MatrixXd pre;      // W1 z + b1
    MatrixXd act;      // after activation and dropout 1
    MatrixXd mask1;    // scaled dropout masks (empty when inactive)
    MatrixXd mask2;
  };

  struct Cache {
    MatrixXd input;
    std::vector<BlockCache> blocks;
    detail::LayerNormCache final_ln;
    MatrixXd features;  // input to the output layer
  };

  /// Forward pass; dropout is applied only when `dropout_rng` is given.
  [[nodiscard]] MatrixXd forward(const MatrixXd& X, Cache* cache = nullptr, RandomStream* dropout_rng = nullptr) const {
    std::size_t p = 0;
    MatrixXd h = (params_[p] * X).colwise() + params_[p + 1].col(0);
    p += 2;
    if (cache) {
      cache->input = X;
      cache->blocks.assign(arch_.blocks, {});
    }
    for (std::size_t b = 0; b < arch_.blocks; ++b) {
      BlockCache* bc = cache ? &cache->blocks[b] : nullptr;
      const MatrixXd z = detail::layer_norm(h, params_[p], params_[p + 1], bc ? &bc->ln : nullptr);
      MatrixXd pre = (params_[p + 2] * z).colwise() + params_[p + 3].col(0);
      MatrixXd a = activate(pre);
      MatrixXd mask1, mask2;
      if (dropout_rng && arch_.dropout1 > 0.0) {
        mask1 = dropout_mask(a.rows(), a.cols(), arch_.dropout1, *dropout_rng);
        a.array() *= mask1.array();
      }
      MatrixXd u = (params_[p + 4] * a).colwise() + params_[p + 5].col(0);
      if (dropout_rng && arch_.dropout2 > 0.0) {
        mask2 = dropout_mask(u.rows(), u.cols(), arch_.dropout2, *dropout_rng);
        u.array() *= mask2.array();
      }
      h += u;
      if (bc) {
        bc->pre = std::move(pre);
        bc->act = std::move(a);
        bc->mask1 = std::move(mask1);
        bc->mask2 = std::move(mask2);
      }
      p += 6;
    }
    if (arch_.final_norm) {
      h = detail::layer_norm(h, params_[p], params_[p + 1], cache ? &cache->final_ln : nullptr);
      p += 2;
    }
    MatrixXd out = (params_[p] * h).colwise() + params_[p + 1].col(0);
    if (cache) cache->features = std::move(h);
    return out;
  }

  /// Reverse pass from dL/dout. Accumulates parameter gradients into `grads`
  /// when given (same layout as params()) and returns dL/dX.
  MatrixXd backward(const Cache& c, const MatrixXd& dout, std::vector<MatrixXd>* grads = nullptr) const {
    if (grads && grads->size() != params_.size()) {
      grads->clear();
      for (const auto& m : params_) grads->push_back(MatrixXd::Zero(m.rows(), m.cols()));
    }
    auto g = [&](std::size_t i) -> MatrixXd* { return grads ? &(*grads)[i] : nullptr; };
    std::size_t p = params_.size() - 2;
    if (grads) {
      *g(p) += dout * c.features.transpose();
      *g(p + 1) += dout.rowwise().sum();
    }
    MatrixXd dh = params_[p].transpose() * dout;
    if (arch_.final_norm) {
      p -= 2;
      dh = detail::layer_norm_backward(dh, params_[p], c.final_ln, g(p), g(p + 1));
    }
    for (std::size_t bi = arch_.blocks; bi-- > 0;) {
      p -= 6;
      const BlockCache& bc = c.blocks[bi];
      MatrixXd du = dh;
      if (bc.mask2.size() != 0) du.array() *= bc.mask2.array();
      if (grads) {
        *g(p + 4) += du * bc.act.transpose();
        *g(p + 5) += du.rowwise().sum();
      }
      MatrixXd da = params_[p + 4].transpose() * du;
      if (bc.mask1.size() != 0) da.array() *= bc.mask1.array();
      const MatrixXd dpre = da.array() * activate_derivative(bc.pre).array();
      // z is reconstructed from the cached normalized input.
      if (grads) {
        const MatrixXd z =
            (bc.ln.xhat.array().colwise() * params_[p].col(0).array()).colwise() + params_[p + 1].col(0).array();
        *g(p + 2) += dpre * z.transpose();
        *g(p + 3) += dpre.rowwise().sum();
      }
      const MatrixXd dz = params_[p + 2].transpose() * dpre;
      dh += detail::layer_norm_backward(dz, params_[p], bc.ln, g(p), g(p + 1));
    }
    p -= 2;
    if (grads) {
      *g(p) += dh * c.input.transpose();
      *g(p + 1) += dh.rowwise().sum();
    }
    return params_[p].transpose() * dh;
  }

 private:
  // Uniform fan-in initialization in [-fan_in^-1/2, fan_in^-1/2].
  static MatrixXd init(std::size_t rows, std::size_t cols, std::size_t fan_in, RandomStream& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
    return m;
  }

  static MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, RandomStream& rng) {
    MatrixXd m(rows, cols);
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform() < p ? 0.0 : keep;
    return m;
  }

  [[nodiscard]] MatrixXd activate(const MatrixXd& x) const {
    if (arch_.activation == Activation::relu) return x.cwiseMax(0.0);
    return x.unaryExpr([](double v) { return detail::softplus(v); });
  }

  [[nodiscard]] MatrixXd activate_derivative(const MatrixXd& x) const {
    if (arch_.activation == Activation::relu) return (x.array() > 0.0).cast<double>().matrix();
    return x.unaryExpr([](double v) { return detail::sigmoid(v); });
  }

  Architecture arch_;
  std::vector<MatrixXd> params_;
};

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<MatrixXd>& params, const std::vector<MatrixXd>& grads) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(MatrixXd::Zero(p.rows(), p.cols()));
        v_.push_back(MatrixXd::Zero(p.rows(), p.cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
      params[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

  [[nodiscard]] std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<MatrixXd> m_, v_;
};

}  // namespace surropt::nn
