#pragma once

// FiLM-conditioned temporal U-Net used as the flow velocity field
// v(x_t, t | o). Inputs are batched: x is (action_dim, batch * horizon),
// t is one flow time per sample, cond is (cond_dim, batch) with the flattened
// emotion one-hot followed by the observation history.

#include <exflow/nn/layers.hpp>

#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace exflow::nn {

struct ModelConfig {
  int action_dim = 25;
  int horizon = 16;
  int obs_dim = 27;
  int history = 2;
  int num_labels = 7;
  std::vector<int> widths = {64, 128, 256};
  int groups = 8;
  int time_embed_dim = 64;
  int time_hidden = 128;
  int cond_hidden = 256;
  int cond_embed_dim = 128;

  [[nodiscard]] int cond_dim() const { return num_labels + history * obs_dim; }
  [[nodiscard]] int film_dim() const { return time_embed_dim + cond_embed_dim; }

  void validate() const {
    if (action_dim <= 0 || horizon <= 0 || obs_dim < 0 || history < 0 || num_labels <= 0)
      throw std::invalid_argument("model config: dimensions must be positive");
    if (widths.empty()) throw std::invalid_argument("model config: widths must be non-empty");
    for (int w : widths) {
      if (w <= 0 || w % groups != 0)
        throw std::invalid_argument("model config: every width must be a positive multiple of groups");
    }
    if (time_embed_dim < 4 || time_embed_dim % 2 != 0)
      throw std::invalid_argument("model config: time_embed_dim must be even and >= 4");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// conv3 -> GN -> FiLM -> SiLU -> conv3 -> GN -> SiLU, plus a residual path
/// (1x1 conv when the channel count changes).
struct ResBlock {
  int cin = 0, cout = 0;
  Conv1d conv1, conv2, skip;
  GroupNorm norm1, norm2;
  Linear film;
  bool has_skip = false;

  ResBlock() = default;
  ResBlock(ParamLayout& layout, const std::string& name, int cin_, int cout_, int groups,
           int film_dim)
      : cin(cin_), cout(cout_) {
    conv1 = Conv1d(layout, name + ".conv1", cin, cout, 3);
    norm1 = GroupNorm(layout, name + ".norm1", cout, groups);
    conv2 = Conv1d(layout, name + ".conv2", cout, cout, 3);
    norm2 = GroupNorm(layout, name + ".norm2", cout, groups);
    film = Linear(layout, name + ".film", film_dim, 2 * cout);
    has_skip = cin != cout;
    if (has_skip) skip = Conv1d(layout, name + ".skip", cin, cout, 1);
  }

  template <class S>
  struct Cache {
    Mat<S> col1, xhat1, inv1, n1, scale, shift, f1, h1;
    Mat<S> col2, xhat2, inv2, n2;
    Mat<S> skip_col;
  };

  template <class S>
  void forward(const S* p, const Mat<S>& x, const Mat<S>& emb, int length, Cache<S>& c,
               Mat<S>& y) const {
    thread_local Mat<S> a, gb;
    conv1.forward(p, x, length, c.col1, a);
    norm1.forward(p, a, length, c.xhat1, c.inv1, c.n1);
    film.forward(p, emb, gb);
    c.scale = gb.topRows(cout);
    c.shift = gb.bottomRows(cout);
    film_forward(c.n1, c.scale, c.shift, length, c.f1);
    silu_forward(c.f1, c.h1);
    conv2.forward(p, c.h1, length, c.col2, a);
    norm2.forward(p, a, length, c.xhat2, c.inv2, c.n2);
    silu_forward(c.n2, y);
    if (has_skip) {
      thread_local Mat<S> r;
      skip.forward(p, x, length, c.skip_col, r);
      y += r;
    } else {
      y += x;
    }
  }

  /// Accumulates parameter gradients into g and the embedding gradient into demb.
  template <class S>
  void backward(const S* p, S* g, const Cache<S>& c, const Mat<S>& dy, const Mat<S>& emb,
                int length, Mat<S>& demb, Mat<S>& dx) const {
    thread_local Mat<S> t0, t1, dscale, dshift, dgb, de;
    silu_backward(c.n2, dy, t0);
    norm2.backward(p, g, c.xhat2, c.inv2, t0, length, t1);
    conv2.backward(p, g, c.col2, t1, length, &t0);
    silu_backward(c.f1, t0, t1);
    film_backward(c.n1, c.scale, t1, length, t0, dscale, dshift);
    dgb.resize(2 * cout, dscale.cols());
    dgb.topRows(cout) = dscale;
    dgb.bottomRows(cout) = dshift;
    film.backward(p, g, emb, dgb, &de);
    demb += de;
    norm1.backward(p, g, c.xhat1, c.inv1, t0, length, t1);
    conv1.backward(p, g, c.col1, t1, length, &dx);
    if (has_skip) {
      skip.backward(p, g, c.skip_col, dy, length, &t0);
      dx += t0;
    } else {
      dx += dy;
    }
  }
};

/// Layer graph and parameter layout. Holds no weights.
class UNet {
 public:
  explicit UNet(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int fd = cfg_.film_dim();
    time1_ = Linear(layout_, "time.fc1", cfg_.time_embed_dim, cfg_.time_hidden);
    time2_ = Linear(layout_, "time.fc2", cfg_.time_hidden, cfg_.time_embed_dim);
    cond1_ = Linear(layout_, "cond.fc1", cfg_.cond_dim(), cfg_.cond_hidden);
    cond2_ = Linear(layout_, "cond.fc2", cfg_.cond_hidden, cfg_.cond_embed_dim);

    const auto& w = cfg_.widths;
    const int levels = static_cast<int>(w.size());
    for (int i = 0; i < levels; ++i) {
      const int in = i == 0 ? cfg_.action_dim : w[i - 1];
      const std::string n = "down" + std::to_string(i);
      down_.push_back({ResBlock(layout_, n + ".res0", in, w[i], cfg_.groups, fd),
                       ResBlock(layout_, n + ".res1", w[i], w[i], cfg_.groups, fd)});
      if (i + 1 < levels) downsample_.emplace_back(layout_, n + ".downsample", w[i]);
    }
    for (int i = levels - 2; i >= 0; --i) {
      const std::string n = "up" + std::to_string(i);
      upsample_.emplace_back(layout_, n + ".upsample", w[i + 1]);
      up_.push_back({ResBlock(layout_, n + ".res0", w[i + 1] + w[i], w[i], cfg_.groups, fd),
                     ResBlock(layout_, n + ".res1", w[i], w[i], cfg_.groups, fd)});
    }
    head_ = Conv1d(layout_, "head", w[0], cfg_.action_dim, 1, Init::kZero);

    lengths_.push_back(cfg_.horizon);
    for (int i = 0; i + 1 < levels; ++i) lengths_.push_back(Downsample::out_length(lengths_.back()));
  }

  [[nodiscard]] const ModelConfig& config() const { return cfg_; }
  [[nodiscard]] const ParamLayout& layout() const { return layout_; }
  [[nodiscard]] std::size_t num_params() const { return layout_.size(); }

  template <class S>
  struct Tape {
    int batch = 0;
    Mat<S> temb_in, t1, t1a, tout, cond_in, c1, c1a, cout_, emb_pre, emb;
    std::vector<std::array<typename ResBlock::template Cache<S>, 2>> down, up;
    std::vector<Mat<S>> down_mid, skips, down_col, down_out, upsampled, up_cat, up_mid, up_out;
    std::vector<const Mat<S>*> up_src;
    Mat<S> head_col;
  };

  /// Sinusoidal features of the flow time, (time_embed_dim, batch).
  template <class S>
  [[nodiscard]] Mat<S> time_features(const Vec<S>& t) const {
    const int half = cfg_.time_embed_dim / 2;
    Mat<S> out(cfg_.time_embed_dim, t.size());
    for (Eigen::Index s = 0; s < t.size(); ++s) {
      for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
        const double arg = kTimeScale * static_cast<double>(t[s]) * freq;
        out(i, s) = static_cast<S>(std::sin(arg));
        out(half + i, s) = static_cast<S>(std::cos(arg));
      }
    }
    return out;
  }

  template <class S>
  void forward(const S* p, const Mat<S>& x, const Vec<S>& t, const Mat<S>& cond, Tape<S>& tp,
               Mat<S>& out) const {
    const int batch = static_cast<int>(t.size());
    if (x.rows() != cfg_.action_dim || x.cols() != static_cast<Eigen::Index>(batch) * cfg_.horizon)
      throw std::invalid_argument("unet: action input shape mismatch");
    if (cond.rows() != cfg_.cond_dim() || cond.cols() != batch)
      throw std::invalid_argument("unet: condition shape mismatch");
    tp.batch = batch;

    // conditioning embedding
    tp.temb_in = time_features<S>(t);
    time1_.forward(p, tp.temb_in, tp.t1);
    silu_forward(tp.t1, tp.t1a);
    time2_.forward(p, tp.t1a, tp.tout);
    tp.cond_in = cond;
    cond1_.forward(p, tp.cond_in, tp.c1);
    silu_forward(tp.c1, tp.c1a);
    cond2_.forward(p, tp.c1a, tp.cout_);
    tp.emb_pre.resize(cfg_.film_dim(), batch);
    tp.emb_pre.topRows(cfg_.time_embed_dim) = tp.tout;
    tp.emb_pre.bottomRows(cfg_.cond_embed_dim) = tp.cout_;
    silu_forward(tp.emb_pre, tp.emb);

    const int levels = static_cast<int>(cfg_.widths.size());
    tp.down.resize(levels);
    tp.down_mid.resize(levels);
    tp.skips.resize(levels);
    tp.down_col.resize(levels);
    tp.down_out.resize(levels);
    tp.up.resize(levels - 1);
    tp.up_src.resize(levels - 1);
    tp.upsampled.resize(levels - 1);
    tp.up_cat.resize(levels - 1);
    tp.up_mid.resize(levels - 1);
    tp.up_out.resize(levels - 1);

    const Mat<S>* h = &x;
    for (int i = 0; i < levels; ++i) {
      const int len = lengths_[i];
      down_[i][0].forward(p, *h, tp.emb, len, tp.down[i][0], tp.down_mid[i]);
      down_[i][1].forward(p, tp.down_mid[i], tp.emb, len, tp.down[i][1], tp.skips[i]);
      if (i + 1 < levels) {
        downsample_[i].forward(p, tp.skips[i], len, tp.down_col[i], tp.down_out[i]);
        h = &tp.down_out[i];
      } else {
        h = &tp.skips[i];
      }
    }
    for (int j = 0; j < levels - 1; ++j) {
      const int i = levels - 2 - j;  // destination level
      tp.up_src[j] = h;
      Mat<S>& upsampled = tp.upsampled[j];
      upsample_[j].forward(p, *h, lengths_[i + 1], lengths_[i], upsampled);
      tp.up_cat[j].resize(upsampled.rows() + tp.skips[i].rows(), upsampled.cols());
      tp.up_cat[j].topRows(upsampled.rows()) = upsampled;
      tp.up_cat[j].bottomRows(tp.skips[i].rows()) = tp.skips[i];
      up_[j][0].forward(p, tp.up_cat[j], tp.emb, lengths_[i], tp.up[j][0], tp.up_mid[j]);
      up_[j][1].forward(p, tp.up_mid[j], tp.emb, lengths_[i], tp.up[j][1], tp.up_out[j]);
      h = &tp.up_out[j];
    }
    head_.forward(p, *h, cfg_.horizon, tp.head_col, out);
  }

  /// Gradients are accumulated (+=) into g.
  template <class S>
  void backward(const S* p, S* g, const Tape<S>& tp, const Mat<S>& dout) const {
    const int levels = static_cast<int>(cfg_.widths.size());
    thread_local Mat<S> demb, dh, tmp, dd, dskip_total, dup;
    thread_local std::vector<Mat<S>> dskip;
    demb.setZero(cfg_.film_dim(), tp.batch);
    head_.backward(p, g, tp.head_col, dout, cfg_.horizon, &dh);

    dskip.resize(levels);
    for (int j = levels - 2; j >= 0; --j) {
      const int i = levels - 2 - j;
      up_[j][1].backward(p, g, tp.up[j][1], dh, tp.emb, lengths_[i], demb, tmp);
      up_[j][0].backward(p, g, tp.up[j][0], tmp, tp.emb, lengths_[i], demb, dh);
      const Eigen::Index up_rows = dh.rows() - tp.skips[i].rows();
      dskip[i] = dh.bottomRows(tp.skips[i].rows());
      dup = dh.topRows(up_rows);
      upsample_[j].backward(p, g, *tp.up_src[j], dup, lengths_[i + 1], lengths_[i], dh);
    }
    for (int i = levels - 1; i >= 0; --i) {
      const int len = lengths_[i];
      if (i + 1 < levels) {
        downsample_[i].backward(p, g, tp.down_col[i], dh, len, dd);
        dskip_total = dd + dskip[i];
      } else {
        dskip_total = dh;
      }
      down_[i][1].backward(p, g, tp.down[i][1], dskip_total, tp.emb, len, demb, tmp);
      down_[i][0].backward(p, g, tp.down[i][0], tmp, tp.emb, len, demb, dh);
    }

    // conditioning embedding
    thread_local Mat<S> de_pre, d1, d2;
    silu_backward(tp.emb_pre, demb, de_pre);
    const Mat<S> dtout = de_pre.topRows(cfg_.time_embed_dim);
    const Mat<S> dcout = de_pre.bottomRows(cfg_.cond_embed_dim);  // small
    time2_.backward(p, g, tp.t1a, dtout, &d1);
    silu_backward(tp.t1, d1, d2);
    time1_.backward<S>(p, g, tp.temb_in, d2, nullptr);
    cond2_.backward(p, g, tp.c1a, dcout, &d1);
    silu_backward(tp.c1, d1, d2);
    cond1_.backward<S>(p, g, tp.cond_in, d2, nullptr);
  }

 private:
  static constexpr double kTimeScale = 100.0;

  ModelConfig cfg_;
  ParamLayout layout_;
  Linear time1_, time2_, cond1_, cond2_;
  std::vector<std::array<ResBlock, 2>> down_, up_;
  std::vector<Downsample> downsample_;
  std::vector<Upsample> upsample_;
  Conv1d head_;
  std::vector<int> lengths_;
};

}  // namespace exflow::nn
