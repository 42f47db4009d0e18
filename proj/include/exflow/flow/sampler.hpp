#pragma once

// Explicit-Euler transport of Gaussian noise along the learned velocity field,
// from t = 0 to t = 1 in `steps` equal increments.

#include <exflow/flow/model.hpp>

#include <random>
#include <stdexcept>

namespace exflow::flow {

/// x_{k+1} = x_k + dt * field(x_k, t_k), dt = 1 / steps, t_k = k * dt.
template <class M, class Field>
M integrate_euler(M x, int steps, Field&& field) {
  if (steps < 1) throw std::invalid_argument("euler: steps must be >= 1");
  const double dt = 1.0 / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    x += static_cast<typename M::Scalar>(dt) * field(x, t);
  }
  return x;
}

/// Standard normal draw in the model's normalized chunk layout
/// (action_dim x horizon).
template <class S>
Mat<S> draw_source(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat<S> x0(cfg.action_dim, cfg.horizon);
  for (Eigen::Index c = 0; c < x0.cols(); ++c) {
    for (Eigen::Index r = 0; r < x0.rows(); ++r) x0(r, c) = static_cast<S>(gauss(rng));
  }
  return x0;
}

/// Reusable per-caller scratch for repeated sampling.
template <class S>
class Sampler {
 public:
  explicit Sampler(const FlowModel<S>& model) : model_(&model) {}

  /// Flows a given source block (normalized space) for the encoded condition.
  Mat<S> flow(const Mat<S>& x0, const Vec<S>& cond, int steps) {
    const auto& params = model_->params();
    Vec<S> t(1);
    const Mat<S> c = cond;
    return integrate_euler(x0, steps, [&](const Mat<S>& x, double time) {
      t[0] = static_cast<S>(time);
      params.net().forward(params.values().data(), x, t, c, tape_, out_);
      return out_;
    });
  }

  /// Draws x0, integrates, and returns the chunk in physical units.
  ActionChunk sample(const Condition& cond, int steps, std::mt19937_64& rng) {
    const Mat<S> x0 = draw_source<S>(model_->config(), rng);
    return model_->decode_chunk(flow(x0, model_->encode_condition(cond), steps));
  }

 private:
  const FlowModel<S>* model_;
  typename nn::UNet::template Tape<S> tape_;
  Mat<S> out_;
};

template <class S>
ActionChunk sample(const FlowModel<S>& model, const Condition& cond, int steps, std::mt19937_64& rng) {
  Sampler<S> s(model);
  return s.sample(cond, steps, rng);
}

}  // namespace exflow::flow
