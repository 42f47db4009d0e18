#pragma once

#include <exflow/flow/objective.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace exflow::flow {

struct TrainConfig {
  int epochs = 3000;
  int batch_size = 256;
  double learning_rate = 1e-4;
  int horizon = 16;  ///< Tp
  int history = 2;   ///< H
  int inference_steps = 10;
  std::uint64_t seed = 0;

  /// Chunk lengths the policy supports; the network itself accepts any length.
  static bool supported_horizon(int tp) { return tp == 16 || tp == 32; }
  static bool supported_history(int h) { return h == 1 || h == 2 || h == 4 || h == 16; }

  void validate() const {
    if (epochs <= 0 || batch_size <= 0 || horizon <= 0 || history < 0 || inference_steps <= 0)
      throw std::invalid_argument("train config: all sizes must be positive");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: negative learning rate");
  }

  /// Additional rules for the emotion policy: the chunk must survive two
  /// halvings and the window sizes are the supported grid.
  void validate_policy() const {
    validate();
    if (horizon % 4 != 0)
      throw std::invalid_argument("train config: horizon (Tp) must be divisible by 4, got " +
                                  std::to_string(horizon));
    if (!supported_horizon(horizon))
      throw std::invalid_argument("train config: horizon (Tp) must be 16 or 32");
    if (!supported_history(history))
      throw std::invalid_argument("train config: history (H) must be one of 1, 2, 4, 16");
  }
};

/// First/second-moment adaptive gradient descent with bias correction.
template <class S>
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(std::size_t n, Options opt) : opt_(opt), m_(Vec<S>::Zero(n)), v_(Vec<S>::Zero(n)) {}

  void step(Vec<S>& params, const Vec<S>& grad) {
    ++t_;
    const S b1 = static_cast<S>(opt_.beta1), b2 = static_cast<S>(opt_.beta2);
    m_ = b1 * m_ + (S(1) - b1) * grad;
    v_ = b2 * v_ + (S(1) - b2) * grad.cwiseProduct(grad);
    const S c1 = static_cast<S>(1.0 - std::pow(opt_.beta1, t_));
    const S c2 = static_cast<S>(1.0 - std::pow(opt_.beta2, t_));
    const S lr = static_cast<S>(opt_.lr);
    const S eps = static_cast<S>(opt_.eps);
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

  [[nodiscard]] long steps() const { return t_; }

 private:
  Options opt_;
  Vec<S> m_, v_;
  long t_ = 0;
};

/// Normalized training pairs, packed once.
template <class S>
struct TrainingSet {
  PackedBatch<S> data;
  NormStats stats;
  [[nodiscard]] int size() const { return data.batch(); }

  [[nodiscard]] PackedBatch<S> gather(std::span<const int> idx, int horizon) const {
    PackedBatch<S> b;
    b.x1.resize(data.x1.rows(), static_cast<Eigen::Index>(idx.size()) * horizon);
    b.cond.resize(data.cond.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      b.x1.middleCols(static_cast<Eigen::Index>(k) * horizon, horizon) =
          data.x1.middleCols(static_cast<Eigen::Index>(idx[k]) * horizon, horizon);
      b.cond.col(static_cast<Eigen::Index>(k)) = data.cond.col(idx[k]);
    }
    return b;
  }
};

struct TrainResult {
  std::vector<double> epoch_loss;  ///< mean loss per epoch
  bool diverged = false;
};

/// Mini-batch training with a single seeded generator. Per epoch: one shuffle,
/// then for every batch one noise draw (t, x0) and one optimizer step.
template <class S>
class Trainer {
 public:
  Trainer(ModelParams<S>& params, const TrainConfig& cfg)
      : params_(&params), cfg_(cfg), adam_(params.size(), {.lr = cfg.learning_rate}), rng_(cfg.seed) {
    cfg_.validate();
    if (params.config().horizon != cfg.horizon || params.config().history != cfg.history)
      throw std::invalid_argument("trainer: model horizon/history differ from train config");
  }

  /// One optimizer step on an explicit batch and noise; returns the batch loss
  /// before the step.
  S step(const PackedBatch<S>& batch, const FlowNoise<S>& noise) {
    const S loss = evaluate_loss(*params_, batch, noise, ws_, &grad_);
    adam_.step(params_->values(), grad_);
    return loss;
  }

  /// Returns the mean loss over the epoch (NaN if a step diverged).
  double run_epoch(const TrainingSet<S>& set) {
    if (set.data.x1.rows() != params_->config().action_dim ||
        set.data.cond.rows() != params_->config().cond_dim())
      throw std::invalid_argument("trainer: dataset shape does not match model");
    const int n = set.size();
    if (n == 0) throw std::invalid_argument("trainer: empty dataset");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng_);
    const auto& mc = params_->config();
    double total = 0.0;
    for (int start = 0; start < n; start += cfg_.batch_size) {
      const int count = std::min(cfg_.batch_size, n - start);
      const auto batch = set.gather(std::span<const int>(order).subspan(start, count), mc.horizon);
      const auto noise = draw_noise<S>(mc.action_dim, mc.horizon, count, rng_);
      const double loss = static_cast<double>(step(batch, noise));
      if (!std::isfinite(loss)) return std::numeric_limits<double>::quiet_NaN();
      total += loss * count;
    }
    return total / n;
  }

 private:
  ModelParams<S>* params_;
  TrainConfig cfg_;
  Adam<S> adam_;
  std::mt19937_64 rng_;
  LossWorkspace<S> ws_;
  Vec<S> grad_;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Trains in place for cfg.epochs; stops early and flags divergence on a
/// non-finite loss or parameter.
template <class S>
TrainResult train(ModelParams<S>& params, const TrainingSet<S>& set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}) {
  Trainer<S> trainer(params, cfg);
  TrainResult res;
  for (int e = 0; e < cfg.epochs; ++e) {
    const double loss = trainer.run_epoch(set);
    res.epoch_loss.push_back(loss);
    if (on_epoch) on_epoch(e, loss);
    if (!std::isfinite(loss) || !params.values().allFinite()) {
      res.diverged = true;
      break;
    }
  }
  return res;
}

}  // namespace exflow::flow
