#pragma once

// Closed-loop rollouts against scripted target paths, and a nearest-centroid
// emotion classifier on per-clip mean action vectors.

#include <exflow/dataset/frame.hpp>
#include <exflow/dataset/synth.hpp>
#include <exflow/runtime/controller.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace exflow::eval {

/// The robot's starting state: head level, hands at rest.
inline dataset::Frame neutral_frame(const Vec3& target) {
  dataset::Frame f;
  f.hand_left = Pose::translation(dataset::kRestLeft.x(), dataset::kRestLeft.y(), dataset::kRestLeft.z());
  f.hand_right = Pose::translation(dataset::kRestRight.x(), dataset::kRestRight.y(), dataset::kRestRight.z());
  f.target = target;
  return f;
}

/// Drives the controller with the path; the executed action becomes the next
/// robot state. Returns one frame per emitted action.
inline dataset::DemoClip rollout(runtime::Controller& ctl, Emotion emotion,
                                 const std::vector<dataset::TimedPoint>& path) {
  if (path.empty()) throw std::invalid_argument("rollout: empty target path");
  ctl.set_emotion(emotion);
  dataset::DemoClip out;
  out.emotion = emotion;
  dataset::Frame state = neutral_frame(path.front().p);
  for (const auto& tp : path) {
    state.target = tp.p;
    state.t_ms = tp.t_ms;
    if (auto a = ctl.push_observation(state.observation())) {
      dataset::Frame next = dataset::Frame::from_action(*a);
      next.t_ms = tp.t_ms;
      next.target = tp.p;
      out.frames.push_back(next);
      state = next;
    }
  }
  return out;
}

inline Eigen::VectorXd mean_action(const dataset::DemoClip& clip) {
  if (clip.frames.empty()) throw std::invalid_argument("mean action of an empty clip");
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dataset::kActDim);
  for (const auto& f : clip.frames) m += f.action();
  return m / static_cast<double>(clip.frames.size());
}

/// Per-emotion centroids of normalized per-clip mean actions.
class CentroidClassifier {
 public:
  CentroidClassifier(const dataset::Corpus& clips, Range act) : act_(std::move(act)) {
    std::array<int, kNumEmotions> count{};
    for (auto& c : centroids_) c = Eigen::VectorXd::Zero(dataset::kActDim);
    for (const auto& c : clips) {
      const int e = index_of(c.emotion);
      centroids_[static_cast<std::size_t>(e)] += feature(c);
      ++count[static_cast<std::size_t>(e)];
    }
    for (int e = 0; e < kNumEmotions; ++e) {
      if (count[static_cast<std::size_t>(e)] == 0)
        throw std::invalid_argument("classifier: no clips for emotion " + std::string(to_string(emotion_from_index(e))));
      centroids_[static_cast<std::size_t>(e)] /= count[static_cast<std::size_t>(e)];
    }
  }

  [[nodiscard]] Eigen::VectorXd feature(const dataset::DemoClip& c) const { return act_.normalize(mean_action(c)); }

  [[nodiscard]] Emotion classify(const dataset::DemoClip& c) const {
    const Eigen::VectorXd f = feature(c);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int e = 0; e < kNumEmotions; ++e) {
      const double d = (f - centroids_[static_cast<std::size_t>(e)]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    return emotion_from_index(best);
  }

  [[nodiscard]] const Eigen::VectorXd& centroid(Emotion e) const { return centroids_[static_cast<std::size_t>(index_of(e))]; }

 private:
  Range act_;
  std::array<Eigen::VectorXd, kNumEmotions> centroids_;
};

struct Confusion {
  std::array<std::array<int, kNumEmotions>, kNumEmotions> counts{};  ///< [truth][predicted]

  void add(Emotion truth, Emotion pred) { ++counts[static_cast<std::size_t>(index_of(truth))][static_cast<std::size_t>(index_of(pred))]; }

  [[nodiscard]] int total() const {
    int n = 0;
    for (const auto& r : counts) for (int v : r) n += v;
    return n;
  }
  [[nodiscard]] double accuracy() const {
    int hit = 0;
    for (int e = 0; e < kNumEmotions; ++e) hit += counts[static_cast<std::size_t>(e)][static_cast<std::size_t>(e)];
    const int n = total();
    return n == 0 ? 0.0 : static_cast<double>(hit) / n;
  }
  [[nodiscard]] double accuracy(Emotion e) const {
    const auto& r = counts[static_cast<std::size_t>(index_of(e))];
    int n = 0;
    for (int v : r) n += v;
    return n == 0 ? 0.0 : static_cast<double>(r[static_cast<std::size_t>(index_of(e))]) / n;
  }
};

inline Confusion score(const CentroidClassifier& clf, const dataset::Corpus& clips) {
  Confusion c;
  for (const auto& clip : clips) c.add(clip.emotion, clf.classify(clip));
  return c;
}

/// Each clip classified against centroids built from all other clips.
/// Emotions with a single clip have no centroid left and count as misses.
inline Confusion leave_one_out(const dataset::Corpus& clips, const Range& act) {
  std::vector<Eigen::VectorXd> feat;
  std::array<Eigen::VectorXd, kNumEmotions> sum;
  std::array<int, kNumEmotions> count{};
  for (auto& s : sum) s = Eigen::VectorXd::Zero(dataset::kActDim);
  for (const auto& c : clips) {
    feat.push_back(act.normalize(mean_action(c)));
    sum[static_cast<std::size_t>(index_of(c.emotion))] += feat.back();
    ++count[static_cast<std::size_t>(index_of(c.emotion))];
  }
  Confusion conf;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const auto own = static_cast<std::size_t>(index_of(clips[i].emotion));
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < static_cast<std::size_t>(kNumEmotions); ++e) {
      Eigen::VectorXd s = sum[e];
      int n = count[e];
      if (e == own) {
        s -= feat[i];
        --n;
      }
      if (n == 0) continue;
      const double d = (feat[i] - s / n).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(e);
      }
    }
    const int miss = (index_of(clips[i].emotion) + 1) % kNumEmotions;
    conf.add(clips[i].emotion, emotion_from_index(best < 0 ? miss : best));
  }
  return conf;
}

struct LatencyStats {
  int calls = 0;
  double mean_ms = 0, p50_ms = 0, p95_ms = 0, max_ms = 0;
};

/// Nearest-rank percentiles of the given durations.
inline LatencyStats summarize_latency(std::vector<double> ms) {
  LatencyStats s;
  s.calls = static_cast<int>(ms.size());
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  const auto rank = [&](double q) {
    const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(ms.size())));
    return ms[std::clamp<std::size_t>(k, 1, ms.size()) - 1];
  };
  double sum = 0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  s.p50_ms = rank(0.50);
  s.p95_ms = rank(0.95);
  s.max_ms = ms.back();
  return s;
}

/// Wall time of `calls` chunk samples for one condition.
template <class S>
LatencyStats time_sampling(const flow::FlowModel<S>& model, const flow::Condition& cond, int steps, int calls,
                           std::uint64_t seed) {
  flow::Sampler<S> sampler(model);
  std::mt19937_64 rng(seed);
  std::vector<double> ms;
  ms.reserve(static_cast<std::size_t>(calls));
  (void)sampler.sample(cond, steps, rng);  // allocate scratch outside the timed calls
  for (int i = 0; i < calls; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)sampler.sample(cond, steps, rng);
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return summarize_latency(std::move(ms));
}

/// Path seeds disjoint from synth_corpus seeds.
inline std::uint64_t fresh_path_seed(std::uint64_t base, Emotion e, int k) {
  return 0xA5A5000000000000ULL ^ dataset::clip_seed(base, e, k);
}

}  // namespace exflow::eval
