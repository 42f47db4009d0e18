#pragma once

// Per-dimension min-max scaling to [-1, 1]. Dimensions whose min equals max
// are constant: they normalize to 0 and denormalize back to the constant.

#include <Eigen/Core>

#include <limits>
#include <stdexcept>

namespace exflow {

struct Range {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  static Range empty(Eigen::Index dim) {
    return {Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity()),
            Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity())};
  }

  [[nodiscard]] Eigen::Index dim() const { return min.size(); }
  [[nodiscard]] bool is_constant(Eigen::Index i) const { return max[i] == min[i]; }

  void include(const Eigen::VectorXd& v) {
    if (v.size() != dim()) throw std::invalid_argument("range: dimension mismatch");
    min = min.cwiseMin(v);
    max = max.cwiseMax(v);
  }

  [[nodiscard]] Eigen::VectorXd normalize(const Eigen::VectorXd& v) const {
    if (v.size() != dim()) throw std::invalid_argument("normalize: dimension mismatch");
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out[i] = is_constant(i) ? 0.0 : 2.0 * (v[i] - min[i]) / (max[i] - min[i]) - 1.0;
    }
    return out;
  }

  [[nodiscard]] Eigen::VectorXd denormalize(const Eigen::VectorXd& v) const {
    if (v.size() != dim()) throw std::invalid_argument("denormalize: dimension mismatch");
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      out[i] = is_constant(i) ? min[i] : (v[i] + 1.0) * 0.5 * (max[i] - min[i]) + min[i];
    }
    return out;
  }

  friend bool operator==(const Range& a, const Range& b) {
    return a.min == b.min && a.max == b.max;
  }
};

/// Scaling for observation vectors and action vectors.
struct NormStats {
  Range obs;
  Range act;

  /// Identity-like stats: every dimension maps [-1, 1] onto itself.
  static NormStats unit(Eigen::Index obs_dim, Eigen::Index act_dim) {
    return {{Eigen::VectorXd::Constant(obs_dim, -1.0), Eigen::VectorXd::Constant(obs_dim, 1.0)},
            {Eigen::VectorXd::Constant(act_dim, -1.0), Eigen::VectorXd::Constant(act_dim, 1.0)}};
  }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

}  // namespace exflow
