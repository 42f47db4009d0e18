#pragma once

// One 10 Hz sample of a demonstration and the clip that holds it.

#include <exflow/emotion.hpp>
#include <exflow/geom.hpp>
#include <exflow/norm.hpp>
#include <exflow/retarget.hpp>

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace exflow::dataset {

/// head 6 + left hand 6 + right hand 6 + target 3 + 6 reserved zeros.
inline constexpr int kObsDim = 27;
/// head 6 + left hand 6 + right hand 6 + face 7.
inline constexpr int kActDim = 25;
inline constexpr int kReservedObs = 6;

inline constexpr std::array<const char*, 25> kActionNames = {
    "head_px",   "head_py",   "head_pz",    "head_rx",   "head_ry",   "head_rz",   "hand_l_px",
    "hand_l_py", "hand_l_pz", "hand_l_rx",  "hand_l_ry", "hand_l_rz", "hand_r_px", "hand_r_py",
    "hand_r_pz", "hand_r_rx", "hand_r_ry",  "hand_r_rz", "vertax_low_y", "vertax_up_y", "r_eye",
    "r_ear",     "s_eye",     "p_eye_x",    "p_eye_y"};
inline constexpr int kNominalPeriodMs = 100;

struct Frame {
  std::int64_t t_ms = 0;
  Pose head;
  Pose hand_left;
  Pose hand_right;
  FaceDofs face;
  Vec3 target = Vec3::Zero();
  bool mark = false;                  ///< set by a record trigger
  std::optional<std::int64_t> rx_ms;  ///< server receipt time, when logged live

  [[nodiscard]] Eigen::VectorXd observation() const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(kObsDim);
    put_pose(v, 0, head);
    put_pose(v, 6, hand_left);
    put_pose(v, 12, hand_right);
    v.segment<3>(18) = target;
    return v;
  }

  [[nodiscard]] Eigen::VectorXd action() const {
    Eigen::VectorXd v(kActDim);
    put_pose(v, 0, head);
    put_pose(v, 6, hand_left);
    put_pose(v, 12, hand_right);
    const auto f = face.to_wire();
    for (int i = 0; i < 7; ++i) v[18 + i] = f[i];
    return v;
  }

  /// Inverse of action(): the robot-side part of a frame.
  static Frame from_action(const Eigen::VectorXd& a) {
    if (a.size() != kActDim) throw std::invalid_argument("action vector must have 25 entries");
    Frame f;
    f.head = pose_at(a, 0);
    f.hand_left = pose_at(a, 6);
    f.hand_right = pose_at(a, 12);
    f.face = FaceDofs{a[18], a[19], a[20], a[21], a[22], a[23], a[24]};
    return f;
  }

 private:
  static void put_pose(Eigen::VectorXd& v, int at, const Pose& p) {
    const auto a = p.to_vec6();
    for (int i = 0; i < 6; ++i) v[at + i] = a[i];
  }
  static Pose pose_at(const Eigen::VectorXd& v, int at) {
    return {Vec3(v[at], v[at + 1], v[at + 2]), Vec3(v[at + 3], v[at + 4], v[at + 5])};
  }
};

enum class Source { kHuman, kSynthetic };

inline std::string to_string(Source s) { return s == Source::kHuman ? "human" : "synthetic"; }

inline Source parse_source(const std::string& s) {
  if (s == "human") return Source::kHuman;
  if (s == "synthetic") return Source::kSynthetic;
  throw std::invalid_argument("unknown clip source '" + s + "'");
}

struct ClipMeta {
  Source source = Source::kSynthetic;
  std::uint64_t seed = 0;
  std::string created_at;  ///< empty when not recorded
};

struct DemoClip {
  Emotion emotion = Emotion::kCalm;
  std::vector<Frame> frames;
  ClipMeta meta;

  [[nodiscard]] int size() const { return static_cast<int>(frames.size()); }

  /// `<emotion>_<seed>.jsonl`
  [[nodiscard]] std::string file_name() const {
    return std::string(to_string(emotion)) + "_" + std::to_string(meta.seed) + ".jsonl";
  }
};

using Corpus = std::vector<DemoClip>;

/// Min-max ranges of observation and action vectors over every frame.
inline NormStats compute_norm_stats(const Corpus& clips) {
  NormStats s{Range::empty(kObsDim), Range::empty(kActDim)};
  std::size_t frames = 0;
  for (const auto& c : clips) {
    for (const auto& f : c.frames) {
      s.obs.include(f.observation());
      s.act.include(f.action());
      ++frames;
    }
  }
  if (frames == 0) throw std::invalid_argument("norm stats: empty corpus");
  return s;
}

}  // namespace exflow::dataset
