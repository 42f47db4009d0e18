#pragma once

// Batched 1-D layers with explicit backward passes.
//
// Activations are column-major matrices of shape (channels, batch * length);
// column b * length + l holds every channel of sample b at time step l.
// Layers do not own weights. Each one records where its tensors live in a
// flat parameter vector (a ParamSlot) and reads/writes through raw pointers
// into that vector and the matching gradient vector.

#include <Eigen/Core>

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace exflow::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using MatMap = Eigen::Map<Mat<S>>;
template <class S>
using CMatMap = Eigen::Map<const Mat<S>>;

struct ParamSlot {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }

  template <class S>
  [[nodiscard]] CMatMap<S> view(const S* base) const {
    return CMatMap<S>(base + offset, rows, cols);
  }
  template <class S>
  [[nodiscard]] MatMap<S> view(S* base) const {
    return MatMap<S>(base + offset, rows, cols);
  }
};

enum class Init { kFanIn, kZero, kOne };

/// Named tensor in the flat parameter vector.
struct ParamEntry {
  std::string name;
  ParamSlot slot;
  Init init = Init::kFanIn;
  int fan_in = 1;
};

/// Hands out consecutive slots; the structured view of a parameter vector.
class ParamLayout {
 public:
  ParamSlot add(std::string name, int rows, int cols, Init init, int fan_in) {
    ParamSlot s{total_, rows, cols};
    total_ += s.size();
    entries_.push_back({std::move(name), s, init, fan_in});
    return s;
  }

  [[nodiscard]] std::size_t size() const { return total_; }
  [[nodiscard]] const std::vector<ParamEntry>& entries() const { return entries_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, ones for
  /// norm scales, zeros for norm shifts and zero-initialized heads.
  /// `zero_heads=false` replaces kZero tensors with fan-in draws as well.
  template <class S>
  void initialize(S* data, std::mt19937_64& rng, bool zero_heads = true) const {
    for (const auto& e : entries_) {
      S* p = data + e.slot.offset;
      Init mode = e.init;
      if (mode == Init::kZero && !zero_heads) mode = Init::kFanIn;
      switch (mode) {
        case Init::kZero:
          std::fill(p, p + e.slot.size(), S(0));
          break;
        case Init::kOne:
          std::fill(p, p + e.slot.size(), S(1));
          break;
        case Init::kFanIn: {
          const double bound = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
          std::uniform_real_distribution<double> dist(-bound, bound);
          for (std::size_t i = 0; i < e.slot.size(); ++i) p[i] = static_cast<S>(dist(rng));
          break;
        }
      }
    }
  }

 private:
  std::size_t total_ = 0;
  std::vector<ParamEntry> entries_;
};

// ---------------------------------------------------------------------------
// Elementwise

template <class S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <class S>
void silu_forward(const Mat<S>& x, Mat<S>& y) {
  y = x.array() / (S(1) + (-x.array()).exp());
}

/// dx = dy * silu'(x), silu'(x) = s (1 + x (1 - s)) with s = sigmoid(x)
template <class S>
void silu_backward(const Mat<S>& x, const Mat<S>& dy, Mat<S>& dx) {
  const auto s = (S(1) + (-x.array()).exp()).inverse();
  dx = dy.array() * s * (S(1) + x.array() * (S(1) - s));
}

// ---------------------------------------------------------------------------
// Dense

struct Linear {
  int in = 0, out = 0;
  ParamSlot w, b;

  Linear() = default;
  Linear(ParamLayout& layout, const std::string& name, int in_, int out_, Init init = Init::kFanIn)
      : in(in_), out(out_) {
    w = layout.add(name + ".w", out, in, init, in);
    b = layout.add(name + ".b", out, 1, init, in);
  }

  template <class S>
  void forward(const S* p, const Mat<S>& x, Mat<S>& y) const {
    y.noalias() = w.view(p) * x;
    y.colwise() += b.view(p).col(0);
  }

  template <class S>
  void backward(const S* p, S* g, const Mat<S>& x, const Mat<S>& dy, Mat<S>* dx) const {
    w.view(g).noalias() += dy * x.transpose();
    b.view(g).col(0) += dy.rowwise().sum();
    if (dx) dx->noalias() = w.view(p).transpose() * dy;
  }
};

// ---------------------------------------------------------------------------
// Convolutions over the time axis

/// Stride-1 convolution, kernel 1 or 3, zero padding that preserves length.
struct Conv1d {
  int cin = 0, cout = 0, k = 1;
  ParamSlot w, b;  // w: cout x (k * cin), tap-major

  Conv1d() = default;
  Conv1d(ParamLayout& layout, const std::string& name, int cin_, int cout_, int k_,
         Init init = Init::kFanIn)
      : cin(cin_), cout(cout_), k(k_) {
    w = layout.add(name + ".w", cout, k * cin, init, k * cin);
    b = layout.add(name + ".b", cout, 1, init, k * cin);
  }

  /// col is the im2col buffer (or a copy of x for k = 1) kept for backward.
  template <class S>
  void forward(const S* p, const Mat<S>& x, int length, Mat<S>& col, Mat<S>& y) const {
    const auto n = x.cols();
    const int batch = static_cast<int>(n / length);
    if (k == 1) {
      col = x;
    } else {
      // Shift the whole batch by one step each way, then clear the taps that
      // crossed a sample boundary.
      col.resize(3 * cin, n);
      col.middleRows(cin, cin) = x;
      if (n > 1) {
        col.block(0, 1, cin, n - 1) = x.leftCols(n - 1);
        col.block(2 * cin, 0, cin, n - 1) = x.rightCols(n - 1);
      }
      for (int s = 0; s < batch; ++s) {
        const Eigen::Index c0 = static_cast<Eigen::Index>(s) * length;
        col.block(0, c0, cin, 1).setZero();
        col.block(2 * cin, c0 + length - 1, cin, 1).setZero();
      }
    }
    y.noalias() = w.view(p) * col;
    y.colwise() += b.view(p).col(0);
  }

  template <class S>
  void backward(const S* p, S* g, const Mat<S>& col, const Mat<S>& dy, int length,
                Mat<S>* dx) const {
    w.view(g).noalias() += dy * col.transpose();
    b.view(g).col(0) += dy.rowwise().sum();
    if (!dx) return;
    if (k == 1) {
      dx->noalias() = w.view(p).transpose() * dy;
      return;
    }
    thread_local Mat<S> dcol;
    dcol.noalias() = w.view(p).transpose() * dy;
    const int batch = static_cast<int>(dy.cols() / length);
    const Eigen::Index n = dy.cols();
    for (int s = 0; s < batch; ++s) {
      const Eigen::Index c0 = static_cast<Eigen::Index>(s) * length;
      dcol.block(0, c0, cin, 1).setZero();
      dcol.block(2 * cin, c0 + length - 1, cin, 1).setZero();
    }
    *dx = dcol.middleRows(cin, cin);
    if (n > 1) {
      dx->leftCols(n - 1) += dcol.block(0, 1, cin, n - 1);
      dx->rightCols(n - 1) += dcol.block(2 * cin, 0, cin, n - 1);
    }
  }
};

/// Kernel 3, stride 2, padding 1. Output length (L - 1) / 2 + 1.
struct Downsample {
  int ch = 0;
  ParamSlot w, b;

  Downsample() = default;
  Downsample(ParamLayout& layout, const std::string& name, int ch_) : ch(ch_) {
    w = layout.add(name + ".w", ch, 3 * ch, Init::kFanIn, 3 * ch);
    b = layout.add(name + ".b", ch, 1, Init::kFanIn, 3 * ch);
  }

  static int out_length(int length) { return (length - 1) / 2 + 1; }

  template <class S>
  void forward(const S* p, const Mat<S>& x, int length, Mat<S>& col, Mat<S>& y) const {
    const int lout = out_length(length);
    const int batch = static_cast<int>(x.cols() / length);
    col.setZero(3 * ch, static_cast<Eigen::Index>(batch) * lout);
    const S* src = x.data();
    S* dst = col.data();
    for (int s = 0; s < batch; ++s) {
      for (int o = 0; o < lout; ++o) {
        for (int tap = 0; tap < 3; ++tap) {
          const int i = 2 * o - 1 + tap;
          if (i < 0 || i >= length) continue;
          std::copy_n(src + (static_cast<std::size_t>(s) * length + i) * ch, ch,
                      dst + (static_cast<std::size_t>(s) * lout + o) * 3 * ch + tap * ch);
        }
      }
    }
    y.noalias() = w.view(p) * col;
    y.colwise() += b.view(p).col(0);
  }

  template <class S>
  void backward(const S* p, S* g, const Mat<S>& col, const Mat<S>& dy, int length,
                Mat<S>& dx) const {
    const int lout = out_length(length);
    const int batch = static_cast<int>(dy.cols() / lout);
    w.view(g).noalias() += dy * col.transpose();
    b.view(g).col(0) += dy.rowwise().sum();
    thread_local Mat<S> dcol;
    dcol.noalias() = w.view(p).transpose() * dy;
    dx.setZero(ch, static_cast<Eigen::Index>(batch) * length);
    const S* src = dcol.data();
    S* dst = dx.data();
    for (int s = 0; s < batch; ++s) {
      for (int o = 0; o < lout; ++o) {
        for (int tap = 0; tap < 3; ++tap) {
          const int i = 2 * o - 1 + tap;
          if (i < 0 || i >= length) continue;
          const S* a = src + (static_cast<std::size_t>(s) * lout + o) * 3 * ch + tap * ch;
          S* d = dst + (static_cast<std::size_t>(s) * length + i) * ch;
          for (int c = 0; c < ch; ++c) d[c] += a[c];
        }
      }
    }
  }
};

/// Transposed convolution, kernel 4, stride 2, padding 1 (doubles the length),
/// cropped to `out_len` positions so it can meet an odd-length skip.
struct Upsample {
  int ch = 0;
  ParamSlot w, b;  // w: (4 * ch) x ch, tap-major rows

  Upsample() = default;
  Upsample(ParamLayout& layout, const std::string& name, int ch_) : ch(ch_) {
    w = layout.add(name + ".w", 4 * ch, ch, Init::kFanIn, 4 * ch);
    b = layout.add(name + ".b", ch, 1, Init::kFanIn, 4 * ch);
  }

  template <class S>
  void forward(const S* p, const Mat<S>& x, int length, int out_len, Mat<S>& y) const {
    const int batch = static_cast<int>(x.cols() / length);
    thread_local Mat<S> z;
    z.noalias() = w.view(p) * x;
    y.resize(ch, static_cast<Eigen::Index>(batch) * out_len);
    y.colwise() = b.view(p).col(0);
    const S* src = z.data();
    S* dst = y.data();
    for (int s = 0; s < batch; ++s) {
      for (int i = 0; i < length; ++i) {
        for (int tap = 0; tap < 4; ++tap) {
          const int o = 2 * i - 1 + tap;
          if (o < 0 || o >= out_len) continue;
          const S* a = src + (static_cast<std::size_t>(s) * length + i) * 4 * ch + tap * ch;
          S* d = dst + (static_cast<std::size_t>(s) * out_len + o) * ch;
          for (int c = 0; c < ch; ++c) d[c] += a[c];
        }
      }
    }
  }

  template <class S>
  void backward(const S* p, S* g, const Mat<S>& x, const Mat<S>& dy, int length, int out_len,
                Mat<S>& dx) const {
    const int batch = static_cast<int>(x.cols() / length);
    thread_local Mat<S> dz;
    dz.setZero(4 * ch, x.cols());
    const S* src = dy.data();
    S* dst = dz.data();
    for (int s = 0; s < batch; ++s) {
      for (int i = 0; i < length; ++i) {
        for (int tap = 0; tap < 4; ++tap) {
          const int o = 2 * i - 1 + tap;
          if (o < 0 || o >= out_len) continue;
          std::copy_n(src + (static_cast<std::size_t>(s) * out_len + o) * ch, ch,
                      dst + (static_cast<std::size_t>(s) * length + i) * 4 * ch + tap * ch);
        }
      }
    }
    w.view(g).noalias() += dz * x.transpose();
    b.view(g).col(0) += dy.rowwise().sum();
    dx.noalias() = w.view(p).transpose() * dz;
  }
};

// ---------------------------------------------------------------------------
// Group normalization with a per-channel affine

struct GroupNorm {
  int ch = 0, groups = 1;
  ParamSlot gamma, beta;
  static constexpr double kEps = 1e-5;

  GroupNorm() = default;
  GroupNorm(ParamLayout& layout, const std::string& name, int ch_, int groups_)
      : ch(ch_), groups(groups_) {
    gamma = layout.add(name + ".gamma", ch, 1, Init::kOne, 1);
    beta = layout.add(name + ".beta", ch, 1, Init::kZero, 1);
  }

  /// xhat and inv_std (groups x batch) are kept for backward.
  template <class S>
  void forward(const S* p, const Mat<S>& x, int length, Mat<S>& xhat, Mat<S>& inv_std,
               Mat<S>& y) const {
    const int batch = static_cast<int>(x.cols() / length);
    const int cg = ch / groups;
    const S n = static_cast<S>(cg * length);
    const S* gam = gamma.view(p).data();
    const S* bet = beta.view(p).data();
    xhat.resize(ch, x.cols());
    y.resize(ch, x.cols());
    inv_std.resize(groups, batch);
    thread_local std::vector<S> acc, mean_c, is_c;
    acc.resize(ch);
    mean_c.resize(ch);
    is_c.resize(ch);
    for (int s = 0; s < batch; ++s) {
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(s) * length * ch;
      const S* xs = x.data() + base;
      S* hs = xhat.data() + base;
      S* ys = y.data() + base;
      std::fill(acc.begin(), acc.end(), S(0));
      for (int l = 0; l < length; ++l) {
        const S* xc = xs + l * ch;
        for (int c = 0; c < ch; ++c) acc[c] += xc[c];
      }
      for (int gi = 0; gi < groups; ++gi) {
        S m = 0;
        for (int j = 0; j < cg; ++j) m += acc[gi * cg + j];
        m /= n;
        for (int j = 0; j < cg; ++j) mean_c[gi * cg + j] = m;
      }
      std::fill(acc.begin(), acc.end(), S(0));
      for (int l = 0; l < length; ++l) {
        const S* xc = xs + l * ch;
        S* hc = hs + l * ch;
        for (int c = 0; c < ch; ++c) {
          const S d = xc[c] - mean_c[c];
          hc[c] = d;
          acc[c] += d * d;
        }
      }
      for (int gi = 0; gi < groups; ++gi) {
        S v = 0;
        for (int j = 0; j < cg; ++j) v += acc[gi * cg + j];
        const S is = S(1) / std::sqrt(v / n + static_cast<S>(kEps));
        inv_std(gi, s) = is;
        for (int j = 0; j < cg; ++j) is_c[gi * cg + j] = is;
      }
      for (int l = 0; l < length; ++l) {
        S* hc = hs + l * ch;
        S* yc = ys + l * ch;
        for (int c = 0; c < ch; ++c) {
          const S h = hc[c] * is_c[c];
          hc[c] = h;
          yc[c] = h * gam[c] + bet[c];
        }
      }
    }
  }

  template <class S>
  void backward(const S* p, S* g, const Mat<S>& xhat, const Mat<S>& inv_std, const Mat<S>& dy,
                int length, Mat<S>& dx) const {
    const int batch = static_cast<int>(dy.cols() / length);
    const int cg = ch / groups;
    const S n = static_cast<S>(cg * length);
    const S* gam = gamma.view(p).data();
    S* dgam = gamma.view(g).data();
    S* dbet = beta.view(g).data();
    dx.resize(ch, dy.cols());
    thread_local std::vector<S> s1, s2, a, b, c3;
    s1.resize(ch);
    s2.resize(ch);
    a.resize(ch);
    b.resize(ch);
    c3.resize(ch);
    for (int s = 0; s < batch; ++s) {
      const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(s) * length * ch;
      const S* dys = dy.data() + base;
      const S* hs = xhat.data() + base;
      S* dxs = dx.data() + base;
      std::fill(s1.begin(), s1.end(), S(0));
      std::fill(s2.begin(), s2.end(), S(0));
      for (int l = 0; l < length; ++l) {
        const S* dc = dys + l * ch;
        const S* hc = hs + l * ch;
        for (int c = 0; c < ch; ++c) {
          s1[c] += dc[c];
          s2[c] += dc[c] * hc[c];
        }
      }
      for (int c = 0; c < ch; ++c) {
        dbet[c] += s1[c];
        dgam[c] += s2[c];
      }
      for (int gi = 0; gi < groups; ++gi) {
        const S k = inv_std(gi, s) / n;
        S sum_dh = 0, sum_dh_xh = 0;
        for (int j = 0; j < cg; ++j) {
          const int c = gi * cg + j;
          sum_dh += gam[c] * s1[c];
          sum_dh_xh += gam[c] * s2[c];
        }
        for (int j = 0; j < cg; ++j) {
          const int c = gi * cg + j;
          a[c] = gam[c] * n * k;
          b[c] = sum_dh * k;
          c3[c] = sum_dh_xh * k;
        }
      }
      for (int l = 0; l < length; ++l) {
        const S* dc = dys + l * ch;
        const S* hc = hs + l * ch;
        S* xc = dxs + l * ch;
        for (int c = 0; c < ch; ++c) xc[c] = dc[c] * a[c] - b[c] - hc[c] * c3[c];
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Feature-wise modulation: y = x * (1 + scale) + shift, per sample and channel.

template <class S>
void film_forward(const Mat<S>& x, const Mat<S>& scale, const Mat<S>& shift, int length,
                  Mat<S>& y) {
  const int batch = static_cast<int>(x.cols() / length);
  y.resize(x.rows(), x.cols());
  for (int s = 0; s < batch; ++s) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(s) * length;
    y.middleCols(c0, length) =
        (x.middleCols(c0, length).array().colwise() * (S(1) + scale.col(s).array())).colwise() +
        shift.col(s).array();
  }
}

template <class S>
void film_backward(const Mat<S>& x, const Mat<S>& scale, const Mat<S>& dy, int length, Mat<S>& dx,
                   Mat<S>& dscale, Mat<S>& dshift) {
  const int batch = static_cast<int>(x.cols() / length);
  dx.resize(x.rows(), x.cols());
  dscale.resize(x.rows(), batch);
  dshift.resize(x.rows(), batch);
  for (int s = 0; s < batch; ++s) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(s) * length;
    auto g = dy.middleCols(c0, length).array();
    dx.middleCols(c0, length) = g.colwise() * (S(1) + scale.col(s).array());
    dscale.col(s) = (g * x.middleCols(c0, length).array()).rowwise().sum().matrix();
    dshift.col(s) = g.rowwise().sum().matrix();
  }
}

}  // namespace exflow::nn
