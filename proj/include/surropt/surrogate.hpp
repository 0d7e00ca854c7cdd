#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surropt/core.hpp"
#include "surropt/nn.hpp"

namespace surropt {

enum class SurrogateMode { o, c, co };

[[nodiscard]] inline std::string_view to_string(SurrogateMode m) noexcept {
  switch (m) {
    case SurrogateMode::o: return "o";
    case SurrogateMode::c: return "c";
    case SurrogateMode::co: return "c+o";
  }
  return "o";
}

[[nodiscard]] inline SurrogateMode surrogate_mode_from_string(std::string_view s) {
  if (s == "o") return SurrogateMode::o;
  if (s == "c") return SurrogateMode::c;
  if (s == "c+o" || s == "co") return SurrogateMode::co;
  throw std::invalid_argument("unknown surrogate mode '" + std::string(s) + "' (o, c, c+o)");
}

enum class ObjectiveLoss { mse, huber, log_cosh, weighted_log_cosh, distance_weighted_mse, relative };

[[nodiscard]] inline std::string_view to_string(ObjectiveLoss l) noexcept {
  switch (l) {
    case ObjectiveLoss::mse: return "mse";
    case ObjectiveLoss::huber: return "huber";
    case ObjectiveLoss::log_cosh: return "log_cosh";
    case ObjectiveLoss::weighted_log_cosh: return "weighted_log_cosh";
    case ObjectiveLoss::distance_weighted_mse: return "distance_weighted_mse";
    case ObjectiveLoss::relative: return "relative";
  }
  return "mse";
}

[[nodiscard]] inline ObjectiveLoss objective_loss_from_string(std::string_view s) {
  for (auto l : {ObjectiveLoss::mse, ObjectiveLoss::huber, ObjectiveLoss::log_cosh, ObjectiveLoss::weighted_log_cosh,
                 ObjectiveLoss::distance_weighted_mse, ObjectiveLoss::relative})
    if (to_string(l) == s) return l;
  throw std::invalid_argument("unknown objective loss '" + std::string(s) + "'");
}

enum class OutputScaling { range, none };

enum class NanPolicy { remove, replace };

struct SurrogateConfig {
  std::size_t blocks = 2;
  std::size_t block_dim = 192;
  double hidden_multiplier = 2.0;
  double dropout1 = 0.15;
  double dropout2 = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 2048;
  std::size_t folds = 3;
  SurrogateMode mode = SurrogateMode::co;
  nn::Activation activation = nn::Activation::smooth;
  bool final_norm = true;
  ObjectiveLoss objective_loss = ObjectiveLoss::mse;
  OutputScaling output_scaling = OutputScaling::range;
  // Epoch budget: E_max = max(min_epochs, min(floor(epoch_budget / N), max_epochs)).
  double epoch_budget = 1e8;
  std::size_t max_epochs = 10000;
  std::size_t min_epochs = 25;
  std::size_t max_patience = 250;
  NanPolicy nan_policy = NanPolicy::remove;
  bool exclude_infeasible = false;
  std::optional<double> outlier_threshold;

  void validate() const {
    if (blocks < 1) throw std::invalid_argument("surrogate: blocks must be >= 1");
    if (block_dim < 1) throw std::invalid_argument("surrogate: block_dim must be >= 1");
    if (folds < 2) throw std::invalid_argument("surrogate: folds must be >= 2");
    if (batch_size < 1) throw std::invalid_argument("surrogate: batch_size must be >= 1");
    if (dropout1 < 0.0 || dropout1 >= 1.0 || dropout2 < 0.0 || dropout2 >= 1.0)
      throw std::invalid_argument("surrogate: dropout must lie in [0, 1)");
  }
};

struct TrainingSchedule {
  std::size_t samples = 0;
  std::size_t max_epochs = 0;
  std::size_t increment = 0;
  std::size_t patience = 0;
  std::vector<std::size_t> fold_stops;
  std::size_t final_epochs = 0;
};

/// Epoch budget for N training samples.
[[nodiscard]] inline TrainingSchedule training_schedule(std::size_t N, const SurrogateConfig& cfg = {}) {
  if (N == 0) throw std::invalid_argument("training_schedule: N must be positive");
  TrainingSchedule s;
  s.samples = N;
  const auto by_budget = static_cast<std::size_t>(std::floor(cfg.epoch_budget / static_cast<double>(N)));
  s.max_epochs = std::max(cfg.min_epochs, std::min(by_budget, cfg.max_epochs));
  s.increment = std::max<std::size_t>(10, s.max_epochs / 10);
  s.patience = std::min(cfg.max_patience, s.max_epochs);
  return s;
}

/// Range scheme for objective targets: per-objective min-max to [0, 1]
/// (clipped), affine map onto the shared interval [lo, hi], then log1p.
/// lo = max_j y_min_j and hi = max_j y_max_j; if lo < 0 the interval is
/// shifted to start at 0, and a degenerate interval becomes [0, 1].
struct OutputNormalizer {
  OutputScaling scaling = OutputScaling::range;
  std::vector<double> y_min;
  std::vector<double> y_max;
  double lo = 0.0;
  double hi = 1.0;

  static OutputNormalizer fit(const std::vector<ObjectiveVector>& Y, OutputScaling scaling = OutputScaling::range) {
    if (Y.empty()) throw std::invalid_argument("output normalizer: no rows");
    OutputNormalizer n;
    n.scaling = scaling;
    const std::size_t q = Y.front().size();
    n.y_min.assign(q, std::numeric_limits<double>::infinity());
    n.y_max.assign(q, -std::numeric_limits<double>::infinity());
    for (const auto& y : Y)
      for (std::size_t j = 0; j < q; ++j) {
        n.y_min[j] = std::min(n.y_min[j], y[j]);
        n.y_max[j] = std::max(n.y_max[j], y[j]);
      }
    if (q > 0) {
      n.lo = *std::max_element(n.y_min.begin(), n.y_min.end());
      n.hi = *std::max_element(n.y_max.begin(), n.y_max.end());
    }
    if (n.lo < 0.0) {
      n.hi -= n.lo;
      n.lo = 0.0;
    }
    if (!(n.hi > n.lo)) {
      n.lo = 0.0;
      n.hi = 1.0;
    }
    return n;
  }

  [[nodiscard]] std::size_t size() const noexcept { return y_min.size(); }

  [[nodiscard]] double forward(double y, std::size_t j) const {
    if (scaling == OutputScaling::none) return y;
    const double range = y_max[j] - y_min[j];
    const double unit = range > 0.0 ? std::clamp((y - y_min[j]) / range, 0.0, 1.0) : 0.0;
    return std::log1p(lo + unit * (hi - lo));
  }

  [[nodiscard]] double inverse(double t, std::size_t j) const {
    if (scaling == OutputScaling::none) return t;
    const double unit = (std::expm1(t) - lo) / (hi - lo);
    return y_min[j] + unit * (y_max[j] - y_min[j]);
  }

  /// d inverse / d t.
  [[nodiscard]] double inverse_derivative(double t, std::size_t j) const {
    if (scaling == OutputScaling::none) return 1.0;
    return std::exp(t) / (hi - lo) * (y_max[j] - y_min[j]);
  }
};

struct NormalizedOutputs {
  std::vector<ObjectiveVector> targets;
  OutputNormalizer state;
};

[[nodiscard]] inline NormalizedOutputs normalize_outputs(const std::vector<ObjectiveVector>& Y) {
  NormalizedOutputs out{{}, OutputNormalizer::fit(Y)};
  for (const auto& y : Y) {
    ObjectiveVector t(y.size());
    for (std::size_t j = 0; j < y.size(); ++j) t[j] = out.state.forward(y[j], j);
    out.targets.push_back(std::move(t));
  }
  return out;
}

[[nodiscard]] inline Point normalize_inputs(std::span<const double> x, const ParameterSpace& space) {
  Point out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - space.lower()[j]) / space.width(j);
  return out;
}

/// Objective predictions (rows x q, original scale) and constraint
/// probabilities (rows x k; k = 0 when the constraint head is inactive).
struct Prediction {
  Eigen::MatrixXd Y;
  Eigen::MatrixXd C;

  [[nodiscard]] std::vector<ObjectiveVector> objectives() const {
    std::vector<ObjectiveVector> out(static_cast<std::size_t>(Y.rows()), ObjectiveVector(Y.cols()));
    for (Eigen::Index i = 0; i < Y.rows(); ++i)
      for (Eigen::Index j = 0; j < Y.cols(); ++j) out[i][j] = Y(i, j);
    return out;
  }

  [[nodiscard]] std::vector<std::vector<double>> probabilities() const {
    std::vector<std::vector<double>> out(static_cast<std::size_t>(C.rows()), std::vector<double>(C.cols()));
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      for (Eigen::Index j = 0; j < C.cols(); ++j) out[i][j] = C(i, j);
    return out;
  }
};

/// Which scalar output to differentiate.
struct OutputSelector {
  enum class Head { objective, constraint } head = Head::objective;
  std::size_t index = 0;
};

/// Joint model x -> (objectives, constraint probabilities) sharing one
/// backbone. Immutable once built; safe for concurrent prediction.
class JointSurrogate {
 public:
  JointSurrogate() = default;

  JointSurrogate(SurrogateConfig cfg, ParameterSpace space, std::size_t q, std::size_t k, OutputNormalizer normalizer,
                 nn::Network net)
      : cfg_(std::move(cfg)), space_(std::move(space)), q_(q), k_(k), norm_(std::move(normalizer)),
        net_(std::move(net)) {
    if (net_.architecture().outputs != objective_outputs() + constraint_outputs())
      throw std::invalid_argument("joint surrogate: network output width does not match mode");
  }

  [[nodiscard]] static nn::Architecture architecture_for(const SurrogateConfig& cfg, std::size_t n, std::size_t q,
                                                         std::size_t k) {
    nn::Architecture a;
    a.inputs = n;
    a.outputs = (cfg.mode != SurrogateMode::c ? q : 0) + (cfg.mode != SurrogateMode::o ? k : 0);
    a.blocks = cfg.blocks;
    a.block_dim = cfg.block_dim;
    a.hidden_multiplier = cfg.hidden_multiplier;
    a.dropout1 = cfg.dropout1;
    a.dropout2 = cfg.dropout2;
    a.activation = cfg.activation;
    a.final_norm = cfg.final_norm;
    return a;
  }

  [[nodiscard]] const SurrogateConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const ParameterSpace& space() const noexcept { return space_; }
  [[nodiscard]] const OutputNormalizer& normalizer() const noexcept { return norm_; }
  [[nodiscard]] const nn::Network& network() const noexcept { return net_; }
  [[nodiscard]] std::size_t q() const noexcept { return q_; }
  [[nodiscard]] std::size_t k() const noexcept { return k_; }
  [[nodiscard]] SurrogateMode mode() const noexcept { return cfg_.mode; }
  [[nodiscard]] std::size_t objective_outputs() const noexcept { return cfg_.mode != SurrogateMode::c ? q_ : 0; }
  [[nodiscard]] std::size_t constraint_outputs() const noexcept { return cfg_.mode != SurrogateMode::o ? k_ : 0; }

  /// Bounds normalization, one column per point.
  [[nodiscard]] Eigen::MatrixXd normalize_inputs(const std::vector<Point>& X) const {
    const std::size_t n = space_.dim();
    Eigen::MatrixXd out(n, X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (X[i].size() != n) throw std::invalid_argument("surrogate: point dimension mismatch");
      for (std::size_t j = 0; j < n; ++j) out(j, i) = (X[i][j] - space_.lower()[j]) / space_.width(j);
    }
    return out;
  }

  [[nodiscard]] Prediction predict(const std::vector<Point>& X) const {
    const Eigen::MatrixXd raw = net_.forward(normalize_inputs(X));
    return decode(raw);
  }

  /// Vector-Jacobian product: given dL/dY (rows x q, original scale) and
  /// dL/dC (rows x k, probabilities), returns dL/dX in raw parameter units.
  /// Either upstream matrix may be empty (treated as zero).
  [[nodiscard]] std::vector<Point> vjp(const std::vector<Point>& X, const Eigen::MatrixXd& dY,
                                       const Eigen::MatrixXd& dC, Prediction* prediction = nullptr) const {
    nn::Network::Cache cache;
    const Eigen::MatrixXd raw = net_.forward(normalize_inputs(X), &cache);
    const Prediction pred = decode(raw);
    Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(raw.rows(), raw.cols());
    const auto qo = static_cast<Eigen::Index>(objective_outputs());
    const auto ko = static_cast<Eigen::Index>(constraint_outputs());
    if (dY.size() != 0 && qo > 0)
      for (Eigen::Index i = 0; i < raw.cols(); ++i)
        for (Eigen::Index j = 0; j < qo; ++j)
          dout(j, i) = dY(i, j) * norm_.inverse_derivative(raw(j, i), static_cast<std::size_t>(j));
    if (dC.size() != 0 && ko > 0)
      for (Eigen::Index i = 0; i < raw.cols(); ++i)
        for (Eigen::Index j = 0; j < ko; ++j) {
          const double c = pred.C(i, j);
          dout(qo + j, i) = dC(i, j) * c * (1.0 - c);
        }
    const Eigen::MatrixXd dXt = net_.backward(cache, dout);
    std::vector<Point> grads(X.size(), Point(space_.dim()));
    for (std::size_t i = 0; i < X.size(); ++i)
      for (std::size_t j = 0; j < space_.dim(); ++j)
        grads[i][j] = dXt(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) / space_.width(j);
    if (prediction) *prediction = pred;
    return grads;
  }

  /// Gradient of one output with respect to a raw input point.
  [[nodiscard]] Point input_gradient(const Point& x, OutputSelector sel) const {
    Eigen::MatrixXd dY, dC;
    if (sel.head == OutputSelector::Head::objective) {
      if (sel.index >= objective_outputs()) throw std::out_of_range("input_gradient: objective index");
      dY = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(q_));
      dY(0, static_cast<Eigen::Index>(sel.index)) = 1.0;
    } else {
      if (sel.index >= constraint_outputs()) throw std::out_of_range("input_gradient: constraint index");
      dC = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(k_));
      dC(0, static_cast<Eigen::Index>(sel.index)) = 1.0;
    }
    return vjp({x}, dY, dC).front();
  }

 private:
  [[nodiscard]] Prediction decode(const Eigen::MatrixXd& raw) const {
    Prediction p;
    const auto B = raw.cols();
    const auto qo = static_cast<Eigen::Index>(objective_outputs());
    const auto ko = static_cast<Eigen::Index>(constraint_outputs());
    p.Y.resize(B, qo);
    p.C.resize(B, ko);
    for (Eigen::Index i = 0; i < B; ++i) {
      for (Eigen::Index j = 0; j < qo; ++j) p.Y(i, j) = norm_.inverse(raw(j, i), static_cast<std::size_t>(j));
      for (Eigen::Index j = 0; j < ko; ++j) p.C(i, j) = nn::detail::sigmoid(raw(qo + j, i));
    }
    return p;
  }

  SurrogateConfig cfg_;
  ParameterSpace space_;
  std::size_t q_ = 0;
  std::size_t k_ = 0;
  OutputNormalizer norm_;
  nn::Network net_;
};

namespace detail {

struct TrainingData {
  Eigen::MatrixXd X;  // n x N, normalized
  Eigen::MatrixXd T;  // q x N, normalized objective targets
  Eigen::MatrixXd C;  // k x N, constraint flags
};

// Mean objective loss and its gradient with respect to predictions.
inline double objective_loss(ObjectiveLoss kind, const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                             Eigen::MatrixXd* grad) {
  const double count = static_cast<double>(pred.size());
  if (count == 0) return 0.0;
  double total = 0.0;
  if (grad) grad->resize(pred.rows(), pred.cols());
  for (Eigen::Index j = 0; j < pred.cols(); ++j)
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
      const double y = target(i, j);
      const double e = pred(i, j) - y;
      double v = 0.0, d = 0.0;
      switch (kind) {
        case ObjectiveLoss::mse: v = e * e; d = 2.0 * e; break;
        case ObjectiveLoss::huber:
          if (std::abs(e) <= 1.0) { v = 0.5 * e * e; d = e; }
          else { v = std::abs(e) - 0.5; d = e > 0 ? 1.0 : -1.0; }
          break;
        case ObjectiveLoss::log_cosh:
        case ObjectiveLoss::weighted_log_cosh: {
          const double a = std::abs(e);
          v = a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
          d = std::tanh(e);
          if (kind == ObjectiveLoss::weighted_log_cosh) {
            const double w = 1.0 / (std::abs(y) + 1.0);
            v *= w;
            d *= w;
          }
          break;
        }
        case ObjectiveLoss::distance_weighted_mse: {
          const double w = 1.0 / (1.0 + std::abs(y));
          v = w * e * e;
          d = 2.0 * w * e;
          break;
        }
        case ObjectiveLoss::relative: {
          const double w = 1.0 / (std::abs(y) + 1e-7);
          v = std::abs(e) * w;
          d = (e > 0 ? 1.0 : (e < 0 ? -1.0 : 0.0)) * w;
          break;
        }
      }
      total += v;
      if (grad) (*grad)(i, j) = d / count;
    }
  return total / count;
}

// Mean binary cross-entropy on logits and its gradient.
inline double bce_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& target, Eigen::MatrixXd* grad) {
  const double count = static_cast<double>(logits.size());
  if (count == 0) return 0.0;
  double total = 0.0;
  if (grad) grad->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j)
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double z = logits(i, j);
      const double t = target(i, j);
      total += nn::detail::softplus(z) - t * z;
      if (grad) (*grad)(i, j) = (nn::detail::sigmoid(z) - t) / count;
    }
  return total / count;
}

inline Eigen::MatrixXd columns(const Eigen::MatrixXd& m, std::span<const std::size_t> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// Joint loss; fills dout when given.
inline double joint_loss(const SurrogateConfig& cfg, std::size_t qo, const Eigen::MatrixXd& out,
                         const Eigen::MatrixXd& T, const Eigen::MatrixXd& C, Eigen::MatrixXd* dout) {
  const auto q = static_cast<Eigen::Index>(qo);
  const Eigen::Index k = out.rows() - q;
  double loss = 0.0;
  Eigen::MatrixXd gobj, gcon;
  if (q > 0) loss += objective_loss(cfg.objective_loss, out.topRows(q), T, dout ? &gobj : nullptr);
  if (k > 0) loss += bce_logits(out.bottomRows(k), C, dout ? &gcon : nullptr);
  if (dout) {
    dout->resize(out.rows(), out.cols());
    if (q > 0) dout->topRows(q) = gobj;
    if (k > 0) dout->bottomRows(k) = gcon;
  }
  return loss;
}

struct FitResult {
  nn::Network net;
  std::size_t epochs = 0;
  bool diverged = false;
};

// Adam training for up to `max_epochs` epochs. When validation data is given,
// training stops once validation loss has not improved for `patience` epochs;
// weights are not restored.
inline FitResult fit(const SurrogateConfig& cfg, const nn::Architecture& arch, const TrainingData& train,
                     const TrainingData* val, std::size_t max_epochs, std::size_t increment, std::size_t patience,
                     RandomStream rng) {
  FitResult r{nn::Network(arch, rng), 0, false};
  nn::Adam adam(cfg.learning_rate);
  const std::size_t qo = static_cast<std::size_t>(train.T.rows());
  const auto N = static_cast<std::size_t>(train.X.cols());
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Eigen::MatrixXd> grads;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  bool stop = false;
  while (!stop && r.epochs < max_epochs) {
    const std::size_t chunk_end = std::min(max_epochs, r.epochs + increment);
    while (r.epochs < chunk_end) {
      if (N > cfg.batch_size) rng.shuffle(order.begin(), order.end());
      bool bad = false;
      for (std::size_t start = 0; start < N; start += cfg.batch_size) {
        const std::size_t end = std::min(N, start + cfg.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const bool whole = (start == 0 && end == N && N <= cfg.batch_size);
        const Eigen::MatrixXd Xb = whole ? train.X : columns(train.X, idx);
        const Eigen::MatrixXd Tb = whole ? train.T : columns(train.T, idx);
        const Eigen::MatrixXd Cb = whole ? train.C : columns(train.C, idx);
        nn::Network::Cache cache;
        const Eigen::MatrixXd out = r.net.forward(Xb, &cache, &rng);
        Eigen::MatrixXd dout;
        const double loss = joint_loss(cfg, qo, out, Tb, Cb, &dout);
        if (!std::isfinite(loss)) {
          bad = true;
          break;
        }
        for (auto& g : grads) g.setZero();
        r.net.backward(cache, dout, &grads);
        adam.step(r.net.params(), grads);
      }
      ++r.epochs;
      if (bad) {
        r.diverged = true;
        stop = true;
        break;
      }
      if (val) {
        const Eigen::MatrixXd vout = r.net.forward(val->X);
        const double vloss = joint_loss(cfg, qo, vout, val->T, val->C, nullptr);
        if (!std::isfinite(vloss)) {
          r.diverged = true;
          stop = true;
          break;
        }
        if (vloss < best) {
          best = vloss;
          since_best = 0;
        } else if (++since_best >= patience) {
          stop = true;
          break;
        }
      }
    }
  }
  return r;
}

}  // namespace detail

struct TrainResult {
  JointSurrogate model;
  TrainingSchedule schedule;
  std::size_t samples_used = 0;
};

/// Records usable for training under the configured preprocessing switches.
[[nodiscard]] inline std::vector<EvaluationRecord> training_records(std::span<const EvaluationRecord> data,
                                                                    const SurrogateConfig& cfg) {
  std::vector<EvaluationRecord> out;
  if (data.empty()) return out;
  const std::size_t q = data.front().objectives.size();
  std::vector<double> worst(q, -std::numeric_limits<double>::infinity());
  for (const auto& r : data)
    for (std::size_t j = 0; j < q; ++j)
      if (!std::isnan(r.objectives[j])) worst[j] = std::max(worst[j], r.objectives[j]);
  for (const auto& r : data) {
    EvaluationRecord rec = r;
    if (!rec.viable()) {
      if (cfg.nan_policy == NanPolicy::remove) continue;
      for (std::size_t j = 0; j < q; ++j)
        if (std::isnan(rec.objectives[j])) rec.objectives[j] = std::isfinite(worst[j]) ? 2.0 * worst[j] : 0.0;
    }
    if (cfg.exclude_infeasible && !rec.constraints.empty() &&
        std::none_of(rec.constraints.begin(), rec.constraints.end(), [](std::uint8_t f) { return f == 1; }))
      continue;
    out.push_back(std::move(rec));
  }
  if (cfg.outlier_threshold && out.size() > 1) {
    std::vector<double> mean(q, 0.0), sd(q, 0.0);
    for (const auto& r : out)
      for (std::size_t j = 0; j < q; ++j) mean[j] += std::log(r.objectives[j] + 1.0);
    for (auto& m : mean) m /= static_cast<double>(out.size());
    for (const auto& r : out)
      for (std::size_t j = 0; j < q; ++j) sd[j] += std::pow(std::log(r.objectives[j] + 1.0) - mean[j], 2);
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(out.size()));
    std::erase_if(out, [&](const EvaluationRecord& r) {
      for (std::size_t j = 0; j < q; ++j)
        if (sd[j] > 0.0 && std::abs((std::log(r.objectives[j] + 1.0) - mean[j]) / sd[j]) > *cfg.outlier_threshold)
          return true;
      return false;
    });
  }
  return out;
}

/// Trains the joint model with cross-validated epoch selection: each of the
/// K contiguous folds trains until early stopping, and the final model is
/// retrained from scratch on all data for the mean stopped epoch count.
[[nodiscard]] inline TrainResult train(std::span<const EvaluationRecord> data, const ParameterSpace& space,
                                       const SurrogateConfig& cfg, RandomStream rng) {
  cfg.validate();
  const auto records = training_records(data, cfg);
  const std::size_t N = records.size();
  if (N < 2 * cfg.folds)
    throw std::invalid_argument("surrogate training needs at least " + std::to_string(2 * cfg.folds) +
                                " usable records; have " + std::to_string(N));
  const std::size_t q = records.front().objectives.size();
  const std::size_t k = records.front().constraints.size();
  const std::size_t n = space.dim();

  std::vector<ObjectiveVector> Y;
  for (const auto& r : records) Y.push_back(r.objectives);
  auto normalizer = OutputNormalizer::fit(Y, cfg.output_scaling);
  const auto arch = JointSurrogate::architecture_for(cfg, n, q, k);
  const std::size_t qo = cfg.mode != SurrogateMode::c ? q : 0;
  const std::size_t ko = cfg.mode != SurrogateMode::o ? k : 0;

  detail::TrainingData all;
  all.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(N));
  all.T.resize(static_cast<Eigen::Index>(qo), static_cast<Eigen::Index>(N));
  all.C.resize(static_cast<Eigen::Index>(ko), static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < n; ++j)
      all.X(static_cast<Eigen::Index>(j), col) = (records[i].params[j] - space.lower()[j]) / space.width(j);
    for (std::size_t j = 0; j < qo; ++j)
      all.T(static_cast<Eigen::Index>(j), col) = normalizer.forward(records[i].objectives[j], j);
    for (std::size_t j = 0; j < ko; ++j) all.C(static_cast<Eigen::Index>(j), col) = records[i].constraints[j];
  }

  TrainingSchedule schedule = training_schedule(N, cfg);
  const std::size_t K = cfg.folds;
  std::size_t start = 0;
  for (std::size_t f = 0; f < K; ++f) {
    const std::size_t len = N / K + (f < N % K ? 1 : 0);
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < N; ++i) (i >= start && i < start + len ? va : tr).push_back(i);
    start += len;
    const detail::TrainingData train_fold{detail::columns(all.X, tr), detail::columns(all.T, tr),
                                          detail::columns(all.C, tr)};
    const detail::TrainingData val_fold{detail::columns(all.X, va), detail::columns(all.T, va),
                                        detail::columns(all.C, va)};
    const auto fit = detail::fit(cfg, arch, train_fold, &val_fold, schedule.max_epochs, schedule.increment,
                                 schedule.patience, rng.derive("fold-" + std::to_string(f)));
    schedule.fold_stops.push_back(fit.epochs);
  }
  const double mean_stop =
      std::accumulate(schedule.fold_stops.begin(), schedule.fold_stops.end(), 0.0) / static_cast<double>(K);
  schedule.final_epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mean_stop)));
  auto final_fit = detail::fit(cfg, arch, all, nullptr, schedule.final_epochs, schedule.final_epochs,
                               schedule.patience, rng.derive("final"));
  return {JointSurrogate(cfg, space, q, k, std::move(normalizer), std::move(final_fit.net)), schedule, N};
}

}  // namespace surropt
