#pragma once

// Rigid-body pose algebra.
//
// A Pose is stored as position + rotation vector (axis * angle), six numbers,
// which is the representation used on every wire and file format. Composition
// goes through a unit quaternion so repeated products do not drift.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>

namespace exflow {

using Vec3 = Eigen::Vector3d;

/// Unit quaternion with the double cover fixed to w >= 0.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}
  explicit Rotation(const Eigen::Quaterniond& q) : q_(q) { canonicalize(); }

  static Rotation from_rotation_vector(const Vec3& rv) {
    const double angle = rv.norm();
    if (angle < 1e-12) {
      // first-order expansion; exact to machine precision at this size
      Eigen::Quaterniond q(1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z());
      return Rotation(q);
    }
    return Rotation(Eigen::Quaterniond(Eigen::AngleAxisd(angle, rv / angle)));
  }

  static Rotation about_z(double angle) { return from_rotation_vector(Vec3(0, 0, angle)); }
  static Rotation about_y(double angle) { return from_rotation_vector(Vec3(0, angle, 0)); }
  static Rotation about_x(double angle) { return from_rotation_vector(Vec3(angle, 0, 0)); }

  /// Rotation vector with angle in [0, pi]. At pi (to round-off) the axis is
  /// chosen so its first non-zero component is positive.
  [[nodiscard]] Vec3 rotation_vector() const {
    const Vec3 v = q_.vec();
    const double s = v.norm();
    if (s < 1e-12) return 2.0 * v;  // small-angle limit, w ~ 1
    const double angle = 2.0 * std::atan2(s, q_.w());
    Vec3 axis = v / s;
    if (std::abs(q_.w()) < 1e-15) {
      for (int i = 0; i < 3; ++i) {
        if (axis[i] != 0.0) {
          if (axis[i] < 0.0) axis = -axis;
          break;
        }
      }
    }
    return angle * axis;
  }

  [[nodiscard]] const Eigen::Quaterniond& quaternion() const { return q_; }
  [[nodiscard]] Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
  [[nodiscard]] Rotation inverse() const { return Rotation(q_.conjugate()); }
  [[nodiscard]] Vec3 rotate(const Vec3& v) const { return q_ * v; }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    return Rotation(a.q_ * b.q_);
  }

 private:
  void canonicalize() {
    q_.normalize();
    if (q_.w() < 0.0) q_.coeffs() = -q_.coeffs();
  }

  Eigen::Quaterniond q_;
};

/// 6-DoF rigid transform: position in meters, orientation as a rotation vector
/// in radians with magnitude in [0, pi].
struct Pose {
  Vec3 position = Vec3::Zero();
  Vec3 orientation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose translation(double x, double y, double z) { return {Vec3(x, y, z), Vec3::Zero()}; }

  static Pose from_parts(const Vec3& position, const Rotation& rot) {
    return {position, rot.rotation_vector()};
  }

  /// Builds a pose from [px, py, pz, rx, ry, rz]; the rotation vector is
  /// canonicalized. Throws on non-finite input.
  static Pose from_vec6(std::span<const double, 6> v) {
    for (double x : v) {
      if (!std::isfinite(x)) throw std::invalid_argument("pose component is not finite");
    }
    const Vec3 rv(v[3], v[4], v[5]);
    return {Vec3(v[0], v[1], v[2]), Rotation::from_rotation_vector(rv).rotation_vector()};
  }

  [[nodiscard]] std::array<double, 6> to_vec6() const {
    return {position.x(), position.y(), position.z(), orientation.x(), orientation.y(),
            orientation.z()};
  }

  [[nodiscard]] Rotation rotation() const { return Rotation::from_rotation_vector(orientation); }
};

/// a * b: apply b, then a.
inline Pose compose(const Pose& a, const Pose& b) {
  const Rotation ra = a.rotation();
  return Pose::from_parts(a.position + ra.rotate(b.position), ra * b.rotation());
}

inline Pose inverse(const Pose& a) {
  const Rotation inv = a.rotation().inverse();
  return Pose::from_parts(-inv.rotate(a.position), inv);
}

/// Pose p re-expressed in the coordinates of `frame`.
inline Pose express_in_frame(const Pose& p, const Pose& frame) {
  return compose(inverse(frame), p);
}

/// Largest absolute difference between the homogeneous matrices of a and b.
inline double pose_distance(const Pose& a, const Pose& b) {
  const double dp = (a.position - b.position).cwiseAbs().maxCoeff();
  const double dr = (a.rotation().matrix() - b.rotation().matrix()).cwiseAbs().maxCoeff();
  return std::max(dp, dr);
}

}  // namespace exflow
