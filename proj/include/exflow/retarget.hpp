#pragma once

// Operator-to-robot retargeting: head orientation, scaled relative hand
// placement, and the seven-channel face mapping onto the robot's eye/ear DoFs.

#include <exflow/geom.hpp>

#include <algorithm>
#include <array>
#include <numbers>
#include <span>
#include <stdexcept>

namespace exflow {

/// Face-tracker signals used by the mapping. Left/right channels arrive
/// pre-averaged. Blend values are clamped to [0, 1] on construction.
struct FaceBlend {
  double c_eye = 0.0;   ///< eye closedness
  double d_lip = 0.0;   ///< lip-corner dimple
  double h_brow = 0.0;  ///< brow lower
  double h_chin = 0.0;  ///< chin raise
  double theta_x = 0.0; ///< gaze, radians
  double theta_y = 0.0;

  static constexpr std::size_t kWireSize = 6;

  FaceBlend() = default;
  FaceBlend(double c_eye_, double d_lip_, double h_brow_, double h_chin_, double theta_x_ = 0.0,
            double theta_y_ = 0.0)
      : c_eye(std::clamp(c_eye_, 0.0, 1.0)),
        d_lip(std::clamp(d_lip_, 0.0, 1.0)),
        h_brow(std::clamp(h_brow_, 0.0, 1.0)),
        h_chin(std::clamp(h_chin_, 0.0, 1.0)),
        theta_x(theta_x_),
        theta_y(theta_y_) {}

  /// Wire order: [C_eye, D_lip, H_brow, H_chin, theta_x, theta_y].
  static FaceBlend from_wire(std::span<const double, kWireSize> v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  [[nodiscard]] std::array<double, kWireSize> to_wire() const {
    return {c_eye, d_lip, h_brow, h_chin, theta_x, theta_y};
  }
};

/// The robot's facial degrees of freedom. Both ears receive r_ear.
struct FaceDofs {
  double vertax_low_y = 0.0;
  double vertax_up_y = 0.0;
  double r_eye = 0.0;
  double r_ear = 0.0;
  double s_eye = 1.0;
  double p_eye_x = 0.0;
  double p_eye_y = 0.0;

  static constexpr std::size_t kWireSize = 7;

  /// Wire order: [vertax_low_y, vertax_up_y, r_eye, r_ear, s_eye, p_eye_x, p_eye_y].
  static FaceDofs from_wire(std::span<const double, kWireSize> v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
  [[nodiscard]] std::array<double, kWireSize> to_wire() const {
    return {vertax_low_y, vertax_up_y, r_eye, r_ear, s_eye, p_eye_x, p_eye_y};
  }

  /// Eyelid vertices ordered, eye scale in [0.1, 1], eye position in [-1, 1]^2.
  [[nodiscard]] bool valid() const {
    return vertax_low_y <= vertax_up_y && vertax_low_y >= -1.0 && vertax_up_y <= 1.0 &&
           s_eye >= 0.1 && s_eye <= 1.0 && p_eye_x >= -1.0 && p_eye_x <= 1.0 &&
           p_eye_y >= -1.0 && p_eye_y <= 1.0;
  }
};

struct RetargetConfig {
  double scale = 1.5;
  double theta_max = std::numbers::pi / 4.0;

  void validate() const {
    if (!(scale > 0.0)) throw std::invalid_argument("retarget scale must be positive");
    if (!(theta_max > 0.0)) throw std::invalid_argument("retarget theta_max must be positive");
  }
};

/// Robot base is fixed: only the head orientation is transferred.
inline Pose map_head(const Pose& operator_head) {
  return {Vec3::Zero(), operator_head.orientation};
}

/// Controller pose relative to the operator's head; position scaled,
/// orientation passed through unscaled.
inline Pose map_hand(const Pose& controller, const Pose& operator_head, const RetargetConfig& cfg) {
  Pose rel = express_in_frame(controller, operator_head);
  rel.position *= cfg.scale;
  return rel;
}

inline FaceDofs map_face(const FaceBlend& b, const RetargetConfig& cfg = {}) {
  constexpr double pi = std::numbers::pi;
  FaceDofs out;
  // Raw lower/upper eyelid targets; the pair is resolved so the vertices
  // never cross.
  const double lower = b.d_lip;
  const double upper = -(b.h_chin + b.h_brow) / 2.0;
  out.vertax_low_y = std::min(lower, upper);
  out.vertax_up_y = std::max(upper, lower);
  out.r_eye = (b.h_chin + b.h_brow) * pi / 6.0;
  out.r_ear = pi / 2.0 * (-b.h_chin + b.h_brow);
  out.s_eye = 0.1 + 0.9 * (1.0 - b.c_eye);
  out.p_eye_x = std::clamp(-b.theta_x / cfg.theta_max, -1.0, 1.0);
  out.p_eye_y = std::clamp(-b.theta_y / cfg.theta_max, -1.0, 1.0);
  return out;
}

}  // namespace exflow
