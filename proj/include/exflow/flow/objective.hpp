#pragma once

// Conditional flow-matching regression loss and its exact gradient.
//
// For data x1 and Gaussian source x0 the network is trained to predict the
// constant velocity x1 - x0 at the interpolant x_t = x0 + t (x1 - x0).

#include <exflow/flow/model.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace exflow::flow {

/// Per-sample flow time and source draw for one batch.
template <class S>
struct FlowNoise {
  Vec<S> t;   ///< (batch)
  Mat<S> x0;  ///< same shape as the packed x1
};

template <class S>
FlowNoise<S> draw_noise(int action_dim, int horizon, int batch, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  FlowNoise<S> n;
  n.t.resize(batch);
  for (int i = 0; i < batch; ++i) n.t[i] = static_cast<S>(unif(rng));
  n.x0.resize(action_dim, static_cast<Eigen::Index>(batch) * horizon);
  for (Eigen::Index c = 0; c < n.x0.cols(); ++c) {
    for (Eigen::Index r = 0; r < n.x0.rows(); ++r) n.x0(r, c) = static_cast<S>(gauss(rng));
  }
  return n;
}

template <class S>
struct LossAndGrad {
  S loss = 0;
  Vec<S> grad;
};

/// Buffers reused across loss evaluations of the same batch shape.
template <class S>
struct LossWorkspace {
  typename nn::UNet::template Tape<S> tape;
  Mat<S> u, xt, v, diff;
};

/// Mean over all elements of (v(x_t, t | o) - (x1 - x0))^2, with the exact
/// reverse-mode gradient w.r.t. the flat parameter vector.
/// Writes the gradient into *grad (overwritten, resized as needed) when grad
/// is non-null and returns the loss.
template <class S>
S evaluate_loss(const ModelParams<S>& params, const PackedBatch<S>& batch,
                const FlowNoise<S>& noise, LossWorkspace<S>& ws, Vec<S>* grad) {
  const auto& cfg = params.config();
  const int b = batch.batch();
  if (b == 0) throw std::invalid_argument("flow matching loss: empty batch");
  if (noise.x0.rows() != batch.x1.rows() || noise.x0.cols() != batch.x1.cols() ||
      noise.t.size() != b)
    throw std::invalid_argument("flow matching loss: noise does not match batch");

  Mat<S>& u = ws.u;
  Mat<S>& xt = ws.xt;
  u = batch.x1 - noise.x0;
  xt.resize(batch.x1.rows(), batch.x1.cols());
  for (int i = 0; i < b; ++i) {
    const auto c0 = static_cast<Eigen::Index>(i) * cfg.horizon;
    xt.middleCols(c0, cfg.horizon) =
        noise.x0.middleCols(c0, cfg.horizon) + noise.t[i] * u.middleCols(c0, cfg.horizon);
  }

  params.net().forward(params.values().data(), xt, noise.t, batch.cond, ws.tape, ws.v);
  ws.diff = ws.v - u;
  const S count = static_cast<S>(ws.diff.size());

  const S loss = ws.diff.squaredNorm() / count;
  if (grad) {
    grad->setZero(static_cast<Eigen::Index>(params.size()));
    ws.v = (S(2) / count) * ws.diff;
    params.net().backward(params.values().data(), grad->data(), ws.tape, ws.v);
  }
  return loss;
}

template <class S>
LossAndGrad<S> loss_and_grad(const ModelParams<S>& params, const PackedBatch<S>& batch,
                             const FlowNoise<S>& noise, LossWorkspace<S>& ws,
                             bool want_grad = true) {
  LossAndGrad<S> out;
  out.loss = evaluate_loss(params, batch, noise, ws, want_grad ? &out.grad : nullptr);
  return out;
}

template <class S>
LossAndGrad<S> loss_and_grad(const ModelParams<S>& params, const PackedBatch<S>& batch,
                             const FlowNoise<S>& noise, bool want_grad = true) {
  LossWorkspace<S> ws;
  return loss_and_grad(params, batch, noise, ws, want_grad);
}

/// Draws t ~ U[0, 1] and x0 ~ N(0, I) per sample, then evaluates the loss.
template <class S>
LossAndGrad<S> fm_loss_and_grad(const ModelParams<S>& params, const PackedBatch<S>& batch,
                                std::mt19937_64& rng) {
  if (batch.batch() == 0) throw std::invalid_argument("flow matching loss: empty batch");
  const auto& cfg = params.config();
  const auto noise = draw_noise<S>(cfg.action_dim, cfg.horizon, batch.batch(), rng);
  return loss_and_grad(params, batch, noise);
}

/// Relative error |a - f| / max(|a|, |f|), 0 when both are exactly 0. The
/// denominator is floored at `floor` so coordinates whose gradient is pure
/// round-off do not dominate.
inline double relative_error(double analytic, double numeric, double floor = 1e-10) {
  const double num = std::abs(analytic - numeric);
  if (num == 0.0) return 0.0;
  return num / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Worst relative error between the analytic gradient and central finite
/// differences on `coords` coordinates drawn uniformly without replacement.
/// Noise is held fixed so the loss is a deterministic function of the weights.
/// The default floor sits above central-difference round-off for O(1) losses.
inline double grad_check(const ModelParams<double>& params, const PackedBatch<double>& batch,
                         const FlowNoise<double>& noise, int coords, std::uint64_t seed,
                         double eps = 1e-5, double floor = 1e-6) {
  if (coords <= 0) return 0.0;
  LossWorkspace<double> ws;
  const auto analytic = loss_and_grad(params, batch, noise, ws).grad;
  ModelParams<double> probe = params;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(params.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(coords), idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(idx[k]);
    const double saved = probe.values()[i];
    probe.values()[i] = saved + eps;
    const double lp = loss_and_grad(probe, batch, noise, ws, false).loss;
    probe.values()[i] = saved - eps;
    const double lm = loss_and_grad(probe, batch, noise, ws, false).loss;
    probe.values()[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (lp - lm) / (2.0 * eps), floor));
  }
  return worst;
}

}  // namespace exflow::flow
