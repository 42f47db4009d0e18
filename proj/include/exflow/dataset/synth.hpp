#pragma once

// Scripted stand-in demonstrations.
//
// A target prop wanders along a smooth random path. Each emotion is a fixed
// archetype: how strongly and how quickly the head follows the target, a
// head posture, a constant facial expression (given as tracker blends and
// pushed through map_face) and an arm motion pattern. Everything that
// distinguishes one emotion from another is in kArchetypes below. Every demo
// opens at the neutral rest pose and eases into its archetype.
//
// Frame: x forward, y left, z up, origin at the robot's head pivot.

#include <exflow/dataset/frame.hpp>
#include <exflow/retarget.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

namespace exflow::dataset {

struct Box {
  Vec3 lo{0.45, -0.45, -0.25};
  Vec3 hi{0.95, 0.45, 0.25};

  [[nodiscard]] Vec3 center() const { return 0.5 * (lo + hi); }
  [[nodiscard]] Vec3 half() const { return 0.5 * (hi - lo); }
  [[nodiscard]] bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

struct TimedPoint {
  std::int64_t t_ms = 0;
  Vec3 p = Vec3::Zero();
};

/// Sum of 3-6 random-phase sinusoids per axis (periods 2-15 s) around the box
/// center, clipped to the box, sampled at 10 Hz.
inline std::vector<TimedPoint> mouse_trajectory(std::uint64_t seed, double duration_s,
                                                const Box& bounds = {}) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("mouse_trajectory: duration must be positive");
  if (!((bounds.hi.array() > bounds.lo.array()).all()) || !bounds.lo.allFinite() ||
      !bounds.hi.allFinite())
    throw std::invalid_argument("mouse_trajectory: degenerate bounds");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(3, 6);
  std::uniform_real_distribution<double> period(2.0, 15.0), phase(0.0, 2.0 * std::numbers::pi),
      weight(0.5, 1.0);
  struct Wave {
    double amp, omega, phase;
  };
  std::array<std::vector<Wave>, 3> waves;
  const Vec3 half = bounds.half();
  for (int ax = 0; ax < 3; ++ax) {
    const int n = count(rng);
    std::vector<double> w(static_cast<std::size_t>(n));
    double total = 0.0;
    for (auto& x : w) total += (x = weight(rng));
    for (int k = 0; k < n; ++k) {
      // amplitudes sum to 0.9 of the half extent, capped at 0.2 m
      const double amp = std::min(0.9 * half[ax], 0.2) * w[static_cast<std::size_t>(k)] / total;
      waves[static_cast<std::size_t>(ax)].push_back({amp, 2.0 * std::numbers::pi / period(rng), phase(rng)});
    }
  }
  const int frames = std::max(1, static_cast<int>(std::lround(duration_s * 10.0)));
  std::vector<TimedPoint> out(static_cast<std::size_t>(frames));
  const Vec3 c = bounds.center();
  for (int i = 0; i < frames; ++i) {
    const double t = 0.1 * i;
    Vec3 p = c;
    for (int ax = 0; ax < 3; ++ax) {
      for (const auto& wv : waves[static_cast<std::size_t>(ax)]) p[ax] += wv.amp * std::sin(wv.omega * t + wv.phase);
    }
    out[static_cast<std::size_t>(i)] = {static_cast<std::int64_t>(i) * kNominalPeriodMs,
                                        p.cwiseMax(bounds.lo).cwiseMin(bounds.hi)};
  }
  return out;
}

enum class ArmMode { kRest, kRaised, kDroop, kThrust, kRetract, kSway, kPoke };

struct Archetype {
  Emotion emotion;
  // face tracker blends: eye closed, lip dimple, brow lower, chin raise
  double c_eye, d_lip, h_brow, h_chin;
  double gain;        ///< fraction of the target direction the head turns to
  double follow;      ///< per-frame smoothing of the head, 1 = no lag
  double pitch_bias;  ///< rad, positive looks down
  double roll_bias;   ///< rad
  ArmMode arms;
  double arm_amp;     ///< m
  double arm_period;  ///< s
};

// One row per emotion, in Emotion order.
inline constexpr std::array<Archetype, kNumEmotions> kArchetypes = {{
    // emotion          c_eye d_lip brow  chin  gain follow pitch  roll   arms               amp   period
    {Emotion::kHappy,   0.10, 0.80, 0.67, 0.00, 0.90, 0.60, -0.15, 0.00, ArmMode::kRaised,  0.06, 1.2},
    {Emotion::kSad,     0.50, 0.00, 0.00, 0.60, 0.40, 0.15, 0.35,  0.00, ArmMode::kDroop,   0.02, 5.0},
    {Emotion::kAngry,   0.30, 0.00, 1.00, 0.60, 1.00, 0.90, 0.10,  0.00, ArmMode::kThrust,  0.03, 0.4},
    {Emotion::kFear,    0.00, 0.20, 0.00, 1.00, 0.50, 0.80, 0.10,  0.00, ArmMode::kRetract, 0.015, 0.3},
    {Emotion::kBored,   0.67, 0.10, 0.20, 0.20, 0.30, 0.05, 0.05,  0.25, ArmMode::kSway,    0.04, 6.0},
    {Emotion::kCurious, 0.00, 0.30, 0.50, 0.00, 1.00, 0.50, -0.05, 0.15, ArmMode::kPoke,    0.80, 2.5},
    {Emotion::kCalm,    0.00, 0.00, 0.00, 0.00, 1.00, 1.00, 0.00,  0.00, ArmMode::kRest,    0.01, 4.0},
}};

inline const Archetype& archetype(Emotion e) { return kArchetypes[static_cast<std::size_t>(index_of(e))]; }

inline const Vec3 kRestLeft{0.25, 0.30, -0.35};
inline const Vec3 kRestRight{0.25, -0.30, -0.35};

struct SynthOptions {
  double noise = 1.0;        ///< scales every noise term; 0 gives the pure archetype
  double poke_weight = 1.0;  ///< share of each curious period spent poking, relative to 40%
  double lead_in_s = 1.5;    ///< time to ease from the neutral pose into the archetype
  Box bounds;
  RetargetConfig retarget;
};

namespace detail {

inline double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

inline double smooth_bump(double x) {
  return x <= 0.0 || x >= 1.0 ? 0.0 : std::pow(std::sin(std::numbers::pi * x), 2);
}

/// Left and right hand positions for one frame.
inline std::pair<Vec3, Vec3> arm_positions(const Archetype& a, double t, double amp_scale,
                                           double phase, const Vec3& target,
                                           const SynthOptions& opt) {
  const double w = 2.0 * std::numbers::pi / a.arm_period;
  const double amp = a.arm_amp * amp_scale;
  const double s = std::sin(w * t + phase);
  Vec3 l = kRestLeft, r = kRestRight;
  const Vec3 to_l = (target - kRestLeft).normalized();
  const Vec3 to_r = (target - kRestRight).normalized();
  switch (a.arms) {
    case ArmMode::kRest:
      l.z() += amp * s;
      r.z() += amp * s;
      break;
    case ArmMode::kRaised:
      l += Vec3(0.05, 0.0, 0.30 + amp * s);
      r += Vec3(0.05, 0.0, 0.30 - amp * s);
      break;
    case ArmMode::kDroop:
      l += Vec3(-0.05, -0.05, -0.10 + amp * s);
      r += Vec3(-0.05, 0.05, -0.10 + amp * s);
      break;
    case ArmMode::kThrust:
      l += 0.25 * to_l + Vec3(0, 0, amp * s);
      r += 0.25 * to_r + Vec3(0, 0, -amp * s);
      break;
    case ArmMode::kRetract:
      l += Vec3(-0.12, -0.10, 0.15) - 0.10 * to_l + Vec3(amp * s, 0, 0);
      r += Vec3(-0.12, 0.10, 0.15) - 0.10 * to_r + Vec3(amp * s, 0, 0);
      break;
    case ArmMode::kSway:
      l += Vec3(0.0, 0.0, -0.05 + amp * s);
      r += Vec3(0.0, 0.0, -0.05 - amp * s);
      break;
    case ArmMode::kPoke: {
      const double duty = std::clamp(0.4 * opt.poke_weight, 0.05, 1.0);
      const double cyc = std::fmod(t / a.arm_period + phase / (2.0 * std::numbers::pi), 1.0);
      const double reach = std::min(amp, 1.0) * smooth_bump(cyc / duty);
      l += 0.05 * to_l;
      r += reach * (target - kRestRight);
      break;
    }
  }
  return {l, r};
}

inline Vec3 hand_orientation(const Archetype& a, bool left) {
  const double sign = left ? 1.0 : -1.0;
  switch (a.arms) {
    case ArmMode::kRaised: return Vec3(0.0, -0.6, sign * 0.3);
    case ArmMode::kDroop: return Vec3(0.0, 0.5, 0.0);
    case ArmMode::kThrust: return Vec3(0.0, 0.0, -sign * 0.2);
    case ArmMode::kRetract: return Vec3(sign * 0.4, -0.3, 0.0);
    case ArmMode::kPoke: return Vec3(0.0, 0.1, sign * 0.1);
    case ArmMode::kSway: return Vec3(0.0, 0.2, 0.0);
    case ArmMode::kRest: return Vec3::Zero();
  }
  return Vec3::Zero();
}

}  // namespace detail

/// Scripted demonstration of `emotion` lasting `duration_s` at 10 Hz.
inline DemoClip synth_demo(Emotion emotion, double duration_s, std::uint64_t seed,
                           const SynthOptions& opt = {}) {
  opt.retarget.validate();
  const auto path = mouse_trajectory(seed, duration_s, opt.bounds);
  const Archetype& a = archetype(emotion);
  // separate stream so the path does not depend on the noise settings
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double amp_scale = 0.8 + 0.4 * unif(rng);
  const double phase = 2.0 * std::numbers::pi * unif(rng);
  const double nz = opt.noise;

  DemoClip clip;
  clip.emotion = emotion;
  clip.meta = {Source::kSynthetic, seed, {}};
  clip.frames.reserve(path.size());

  double yaw = 0.0, pitch = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < path.size(); ++i) {
    const double t = 0.1 * static_cast<double>(i);
    const double w = opt.lead_in_s > 0.0 ? detail::smoothstep(t / opt.lead_in_s) : 1.0;
    const Vec3& target = path[i].p;
    const double gain = 1.0 + w * (a.gain - 1.0);
    const double yaw_goal = gain * std::atan2(target.y(), target.x());
    const double pitch_goal = gain * std::atan2(-target.z(), std::hypot(target.x(), target.y()));
    if (first) {
      yaw = yaw_goal;
      pitch = pitch_goal;
      first = false;
    } else {
      yaw += a.follow * (yaw_goal - yaw);
      pitch += a.follow * (pitch_goal - pitch);
    }
    const Rotation head_rot = Rotation::about_z(yaw + 0.01 * nz * gauss(rng)) *
                              Rotation::about_y(pitch + w * a.pitch_bias + 0.01 * nz * gauss(rng)) *
                              Rotation::about_x(w * a.roll_bias);

    // remaining gaze: target direction seen from the head
    const Vec3 d = head_rot.inverse().rotate(target);
    const double gaze_yaw = std::atan2(d.y(), d.x());
    const double gaze_up = std::atan2(d.z(), std::hypot(d.x(), d.y()));
    // tracker convention: positive theta turns the eye right / down
    const FaceBlend blend(w * a.c_eye + 0.02 * nz * gauss(rng), w * a.d_lip + 0.02 * nz * gauss(rng),
                          w * a.h_brow + 0.02 * nz * gauss(rng), w * a.h_chin + 0.02 * nz * gauss(rng),
                          -gaze_yaw, -gaze_up);

    auto [l, r] = detail::arm_positions(a, t, amp_scale, phase, target, opt);
    l = kRestLeft + w * (l - kRestLeft);
    r = kRestRight + w * (r - kRestRight);
    for (int k = 0; k < 3; ++k) {
      l[k] += 0.004 * nz * gauss(rng);
      r[k] += 0.004 * nz * gauss(rng);
    }

    Frame f;
    f.t_ms = path[i].t_ms;
    f.head = Pose::from_parts(Vec3::Zero(), head_rot);
    f.hand_left = Pose::from_parts(l, Rotation::from_rotation_vector(w * detail::hand_orientation(a, true)));
    f.hand_right = Pose::from_parts(r, Rotation::from_rotation_vector(w * detail::hand_orientation(a, false)));
    f.face = map_face(blend, opt.retarget);
    f.target = target;
    clip.frames.push_back(f);
  }
  return clip;
}

/// Seed of clip k of emotion e in a corpus generated from `base`.
inline std::uint64_t clip_seed(std::uint64_t base, Emotion e, int k) {
  return base * 100000ULL + static_cast<std::uint64_t>(index_of(e)) * 1000ULL +
         static_cast<std::uint64_t>(k);
}

/// `per_emotion` clips of `frames` frames for every emotion, emotion-major.
inline Corpus synth_corpus(int per_emotion, int frames, std::uint64_t base_seed,
                           const SynthOptions& opt = {}) {
  if (per_emotion <= 0 || frames <= 0) throw std::invalid_argument("synth: nothing to generate");
  if (per_emotion > 1000) throw std::invalid_argument("synth: at most 1000 clips per emotion");
  Corpus c;
  for (Emotion e : kAllEmotions) {
    for (int k = 0; k < per_emotion; ++k)
      c.push_back(synth_demo(e, frames / 10.0, clip_seed(base_seed, e, k), opt));
  }
  return c;
}

}  // namespace exflow::dataset
