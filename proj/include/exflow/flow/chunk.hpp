#pragma once

// Values the flow model moves around: action chunks (horizon x action_dim,
// one row per future time step) and the observation condition.

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace exflow::flow {

using ActionChunk = Eigen::MatrixXd;

/// Label one-hot plus a window of past observations (history x obs_dim, oldest
/// row first), in physical units.
struct Condition {
  int label = 0;
  int num_labels = 1;
  Eigen::MatrixXd history;

  [[nodiscard]] Eigen::VectorXd onehot() const {
    if (label < 0 || label >= num_labels) throw std::out_of_range("condition label out of range");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(num_labels);
    v[label] = 1.0;
    return v;
  }
};

inline void require_same_shape(const ActionChunk& a, const ActionChunk& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": chunk shapes differ (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

/// Point on the straight path from x0 (t = 0) to x1 (t = 1), evaluated as
/// x0 + t * (x1 - x0) so it agrees bitwise with target_velocity. t = 1 returns
/// x1 itself.
inline ActionChunk interpolate(const ActionChunk& x0, const ActionChunk& x1, double t) {
  require_same_shape(x0, x1, "interpolate");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t outside [0, 1]");
  if (t == 1.0) return x1;
  return x0 + t * (x1 - x0);
}

/// Velocity of the straight path; independent of t.
inline ActionChunk target_velocity(const ActionChunk& x0, const ActionChunk& x1) {
  require_same_shape(x0, x1, "target_velocity");
  return x1 - x0;
}

}  // namespace exflow::flow
