#pragma once

// Corpus -> trained model artifact, and the named hyperparameter presets.

#include <exflow/dataset/window.hpp>
#include <exflow/flow/artifact.hpp>
#include <exflow/flow/train.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace exflow {

enum class Precision { kFloat32, kFloat64 };

inline std::string to_string(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "float32" || s == "f32") return Precision::kFloat32;
  if (s == "float64" || s == "f64") return Precision::kFloat64;
  throw std::invalid_argument("unknown precision '" + s + "' (float32 or float64)");
}

struct TrainOptions {
  flow::TrainConfig train;
  std::vector<int> widths = {64, 128, 256};
  Precision precision = Precision::kFloat64;
};

struct Preset {
  std::string name;
  TrainOptions options;
  int clips_per_emotion = 10;  ///< corpus the preset is calibrated for
  int frames = 300;
};

/// paper: the full-size defaults.
/// desk: desk-scale widths and epochs, trained in float32.
/// smoke: a few epochs on a tiny corpus, for checking that a configuration runs.
inline std::optional<Preset> find_preset(const std::string& name) {
  Preset p;
  p.name = name;
  if (name == "paper") return p;
  if (name == "desk") {
    p.options.train.epochs = 200;
    p.options.widths = {32, 64, 128};
    p.options.precision = Precision::kFloat32;
    return p;
  }
  if (name == "smoke") {
    p.options.train.epochs = 10;
    p.options.widths = {32, 64, 128};
    p.options.precision = Precision::kFloat32;
    p.clips_per_emotion = 2;
    p.frames = 80;
    return p;
  }
  return std::nullopt;
}

inline nn::ModelConfig model_config_for(const TrainOptions& o) {
  nn::ModelConfig c;
  c.action_dim = dataset::kActDim;
  c.obs_dim = dataset::kObsDim;
  c.num_labels = kNumEmotions;
  c.horizon = o.train.horizon;
  c.history = o.train.history;
  c.widths = o.widths;
  return c;
}

template <class S>
flow::TrainingSet<S> make_training_set(const flow::ModelParams<S>& params, const NormStats& stats,
                                       const std::vector<dataset::Pair>& pairs) {
  const flow::FlowModel<S> model(params, stats);
  return {model.pack(pairs), stats};
}

struct TrainOutcome {
  flow::Artifact artifact;
  flow::TrainResult result;
  std::size_t pairs = 0;
};

namespace detail {

template <class S>
TrainOutcome train_as(const dataset::Corpus& corpus, const TrainOptions& o, const flow::EpochCallback& cb) {
  const auto cfg = model_config_for(o);
  const auto pairs = dataset::window_corpus(corpus, o.train.history, o.train.horizon);
  if (pairs.empty()) throw std::invalid_argument("training: corpus yields no windows");
  const NormStats stats = dataset::compute_norm_stats(corpus);
  auto params = flow::ModelParams<S>::initialized(cfg, o.train.seed);
  const auto set = make_training_set(params, stats, pairs);
  TrainOutcome out;
  out.pairs = pairs.size();
  out.result = flow::train(params, set, o.train, cb);
  out.artifact.params = params.template cast<double>();
  out.artifact.stats = stats;
  out.artifact.precision = to_string(o.precision);
  out.artifact.meta = {{"epochs", o.train.epochs},
                       {"batch_size", o.train.batch_size},
                       {"learning_rate", o.train.learning_rate},
                       {"seed", o.train.seed},
                       {"inference_steps", o.train.inference_steps},
                       {"pairs", pairs.size()},
                       {"clips", corpus.size()}};
  return out;
}

}  // namespace detail

/// Windows the corpus, fits norm stats, trains from a seeded initialization.
inline TrainOutcome train_model(const dataset::Corpus& corpus, const TrainOptions& o,
                                const flow::EpochCallback& cb = {}) {
  o.train.validate_policy();
  if (corpus.empty()) throw std::invalid_argument("training: empty corpus");
  return o.precision == Precision::kFloat32 ? detail::train_as<float>(corpus, o, cb)
                                            : detail::train_as<double>(corpus, o, cb);
}

}  // namespace exflow
