#pragma once

// A trained (or freshly initialized) velocity-field network together with the
// normalization it was trained under.

#include <exflow/flow/chunk.hpp>
#include <exflow/nn/unet.hpp>
#include <exflow/norm.hpp>

#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace exflow::flow {

using nn::Mat;
using nn::ModelConfig;
using nn::Vec;

/// Flat parameter vector plus the network it parameterizes. The structured
/// view is `net().layout().entries()`.
template <class S>
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(std::shared_ptr<const nn::UNet> net)
      : net_(std::move(net)), values_(Vec<S>::Zero(static_cast<Eigen::Index>(net_->num_params()))) {}

  static ModelParams initialized(const ModelConfig& cfg, std::uint64_t seed, bool zero_head = true) {
    ModelParams p(std::make_shared<const nn::UNet>(cfg));
    std::mt19937_64 rng(seed);
    p.net_->layout().initialize(p.values_.data(), rng, zero_head);
    return p;
  }

  [[nodiscard]] const nn::UNet& net() const { return *net_; }
  [[nodiscard]] std::shared_ptr<const nn::UNet> net_ptr() const { return net_; }
  [[nodiscard]] const ModelConfig& config() const { return net_->config(); }
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  [[nodiscard]] const Vec<S>& values() const { return values_; }
  [[nodiscard]] Vec<S>& values() { return values_; }

  template <class T>
  [[nodiscard]] ModelParams<T> cast() const {
    ModelParams<T> out(net_);
    out.values() = values_.template cast<T>();
    return out;
  }

 private:
  std::shared_ptr<const nn::UNet> net_;
  Vec<S> values_;
};

/// Batched network inputs in normalized space.
template <class S>
struct PackedBatch {
  Mat<S> x1;    ///< (action_dim, batch * horizon)
  Mat<S> cond;  ///< (cond_dim, batch)
  [[nodiscard]] int batch() const { return static_cast<int>(cond.cols()); }
};

/// Network + normalization. Immutable once built; share freely across threads.
template <class S>
class FlowModel {
 public:
  FlowModel(ModelParams<S> params, NormStats stats)
      : params_(std::move(params)), stats_(std::move(stats)) {
    const auto& c = params_.config();
    if (stats_.act.dim() != c.action_dim || stats_.obs.dim() != c.obs_dim)
      throw std::invalid_argument("flow model: normalization dims do not match config");
  }

  [[nodiscard]] const ModelParams<S>& params() const { return params_; }
  [[nodiscard]] ModelParams<S>& params() { return params_; }
  [[nodiscard]] const ModelConfig& config() const { return params_.config(); }
  [[nodiscard]] const NormStats& stats() const { return stats_; }

  /// Flattened, normalized condition vector: one-hot then history rows.
  [[nodiscard]] Vec<S> encode_condition(const Condition& c) const {
    const auto& cfg = config();
    if (c.num_labels != cfg.num_labels)
      throw std::invalid_argument("condition: label count does not match model");
    if (c.history.rows() != cfg.history || c.history.cols() != cfg.obs_dim)
      throw std::invalid_argument("condition: history shape does not match model");
    Vec<S> v(cfg.cond_dim());
    v.head(cfg.num_labels) = c.onehot().cast<S>();
    for (int h = 0; h < cfg.history; ++h) {
      const Eigen::VectorXd row = c.history.row(h).transpose();
      v.segment(cfg.num_labels + h * cfg.obs_dim, cfg.obs_dim) = stats_.obs.normalize(row).cast<S>();
    }
    return v;
  }

  /// Chunk (horizon x action_dim, physical units) -> normalized column block
  /// (action_dim x horizon).
  [[nodiscard]] Mat<S> encode_chunk(const ActionChunk& chunk) const {
    const auto& cfg = config();
    if (chunk.rows() != cfg.horizon || chunk.cols() != cfg.action_dim)
      throw std::invalid_argument("chunk shape does not match model");
    Mat<S> out(cfg.action_dim, cfg.horizon);
    for (int l = 0; l < cfg.horizon; ++l) {
      out.col(l) = stats_.act.normalize(chunk.row(l).transpose()).cast<S>();
    }
    return out;
  }

  [[nodiscard]] ActionChunk decode_chunk(const Mat<S>& block) const {
    const auto& cfg = config();
    ActionChunk out(cfg.horizon, cfg.action_dim);
    for (int l = 0; l < cfg.horizon; ++l) {
      out.row(l) = stats_.act.denormalize(block.col(l).template cast<double>()).transpose();
    }
    return out;
  }

  template <class Pairs>
  [[nodiscard]] PackedBatch<S> pack(const Pairs& pairs) const {
    const auto& cfg = config();
    PackedBatch<S> b;
    const auto n = static_cast<Eigen::Index>(pairs.size());
    b.x1.resize(cfg.action_dim, n * cfg.horizon);
    b.cond.resize(cfg.cond_dim(), n);
    Eigen::Index i = 0;
    for (const auto& [cond, chunk] : pairs) {
      b.x1.middleCols(i * cfg.horizon, cfg.horizon) = encode_chunk(chunk);
      b.cond.col(i) = encode_condition(cond);
      ++i;
    }
    return b;
  }

 private:
  ModelParams<S> params_;
  NormStats stats_;
};

/// One velocity evaluation for a batch with per-sample flow times.
template <class S>
Mat<S> velocity(const ModelParams<S>& params, const Mat<S>& x, const Vec<S>& t, const Mat<S>& cond) {
  typename nn::UNet::template Tape<S> tape;
  Mat<S> out;
  params.net().forward(params.values().data(), x, t, cond, tape, out);
  return out;
}

}  // namespace exflow::flow
