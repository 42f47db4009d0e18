#pragma once

// Receding-horizon execution: keep the last H observations, ask a planner for
// a Tp-step chunk, play Ta of it, then plan again.

#include <exflow/emotion.hpp>
#include <exflow/flow/chunk.hpp>
#include <exflow/flow/sampler.hpp>

#include <Eigen/Core>

#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace exflow::runtime {

/// Produces a chunk (Tp x action_dim) for a condition.
using Planner = std::function<flow::ActionChunk(const flow::Condition&)>;

struct ControllerConfig {
  int history = 2;     ///< H
  int horizon = 16;    ///< Tp
  int execute = 0;     ///< Ta; 0 means Tp / 2
  int obs_dim = 27;
  int action_dim = 25;
  int num_labels = kNumEmotions;
  bool flush_on_switch = true;
  double tick_budget_ms = 100.0;

  [[nodiscard]] int ta() const { return execute > 0 ? execute : std::max(1, horizon / 2); }

  void validate() const {
    if (history < 1 || horizon < 1 || obs_dim < 0 || action_dim < 1 || num_labels < 1)
      throw std::invalid_argument("controller config: sizes must be positive");
    if (ta() > horizon) throw std::invalid_argument("controller config: Ta must not exceed Tp");
    if (!(tick_budget_ms > 0.0)) throw std::invalid_argument("controller config: tick budget must be positive");
  }
};

struct Metrics {
  std::uint64_t frames = 0;     ///< actions emitted
  std::uint64_t replans = 0;
  std::uint64_t overruns = 0;
  double mean_sample_ms = 0.0;
  double max_sample_ms = 0.0;
};

class Controller {
 public:
  Controller(ControllerConfig cfg, Planner planner, Emotion emotion = Emotion::kCalm)
      : cfg_(cfg), planner_(std::move(planner)), emotion_(emotion) {
    cfg_.validate();
    if (!planner_) throw std::invalid_argument("controller: planner is empty");
  }

  /// Returns the action for this tick, or nothing during warm-up.
  std::optional<Eigen::VectorXd> push_observation(const Eigen::VectorXd& obs) {
    if (obs.size() != cfg_.obs_dim)
      throw std::invalid_argument("observation has " + std::to_string(obs.size()) + " entries, expected " +
                                  std::to_string(cfg_.obs_dim));
    history_.push_back(obs);
    if (static_cast<int>(history_.size()) > cfg_.history) history_.pop_front();
    if (static_cast<int>(history_.size()) < cfg_.history) return std::nullopt;

    if (pending_.empty() || served_ >= cfg_.ta()) {
      const bool late = replan();
      if (late && last_) {
        ++metrics_.frames;
        return last_;
      }
    }
    last_ = pending_.front();
    pending_.pop_front();
    ++served_;
    ++metrics_.frames;
    return last_;
  }

  /// A different emotion takes effect at the next observation (the queue is
  /// flushed unless flush_on_switch is off).
  void set_emotion(Emotion e) {
    if (e == emotion_) return;
    emotion_ = e;
    if (cfg_.flush_on_switch) pending_.clear();
  }

  [[nodiscard]] Emotion emotion() const { return emotion_; }
  [[nodiscard]] const Metrics& metrics() const { return metrics_; }
  [[nodiscard]] const ControllerConfig& config() const { return cfg_; }
  [[nodiscard]] bool warmed_up() const { return static_cast<int>(history_.size()) == cfg_.history; }
  [[nodiscard]] int pending() const { return static_cast<int>(pending_.size()); }

  [[nodiscard]] flow::Condition condition() const {
    flow::Condition c;
    c.label = index_of(emotion_);
    c.num_labels = cfg_.num_labels;
    c.history.resize(cfg_.history, cfg_.obs_dim);
    for (int h = 0; h < static_cast<int>(history_.size()); ++h) c.history.row(h) = history_[static_cast<std::size_t>(h)].transpose();
    return c;
  }

 private:
  /// Refills the queue; true when planning took longer than one tick.
  bool replan() {
    const auto t0 = std::chrono::steady_clock::now();
    const flow::ActionChunk chunk = planner_(condition());
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (chunk.rows() < 1 || chunk.cols() != cfg_.action_dim)
      throw std::runtime_error("planner returned a chunk of the wrong shape");
    pending_.clear();
    const int keep = std::min<int>(static_cast<int>(chunk.rows()), cfg_.horizon);
    for (int k = 0; k < keep; ++k) pending_.push_back(chunk.row(k).transpose());
    served_ = 0;
    ++metrics_.replans;
    const double n = static_cast<double>(metrics_.replans);
    metrics_.mean_sample_ms += (ms - metrics_.mean_sample_ms) / n;
    metrics_.max_sample_ms = std::max(metrics_.max_sample_ms, ms);
    const bool late = ms > cfg_.tick_budget_ms;
    if (late) ++metrics_.overruns;
    return late;
  }

  ControllerConfig cfg_;
  Planner planner_;
  Emotion emotion_;
  std::deque<Eigen::VectorXd> history_;
  std::deque<Eigen::VectorXd> pending_;
  int served_ = 0;
  std::optional<Eigen::VectorXd> last_;
  Metrics metrics_;
};

/// Planner backed by a flow model; owns its sampling scratch and generator.
template <class S>
Planner model_planner(std::shared_ptr<const flow::FlowModel<S>> model, int steps, std::uint64_t seed) {
  if (!model) throw std::invalid_argument("model planner: no model");
  struct State {
    std::shared_ptr<const flow::FlowModel<S>> model;
    flow::Sampler<S> sampler;
    int steps;
    std::mt19937_64 rng;
  };
  auto st = std::make_shared<State>(State{model, flow::Sampler<S>(*model), steps, std::mt19937_64(seed)});
  return [st](const flow::Condition& c) { return st->sampler.sample(c, st->steps, st->rng); };
}

/// Planner that always returns the same chunk.
inline Planner constant_planner(flow::ActionChunk chunk) {
  return [chunk = std::move(chunk)](const flow::Condition&) { return chunk; };
}

inline ControllerConfig controller_config_for(const nn::ModelConfig& m, int execute = 0) {
  ControllerConfig c;
  c.history = m.history;
  c.horizon = m.horizon;
  c.execute = execute;
  c.obs_dim = m.obs_dim;
  c.action_dim = m.action_dim;
  c.num_labels = m.num_labels;
  return c;
}

}  // namespace exflow::runtime
