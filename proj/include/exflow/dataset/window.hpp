#pragma once

// Slicing clips into (history condition, future action chunk) training pairs.

#include <exflow/dataset/frame.hpp>
#include <exflow/flow/chunk.hpp>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace exflow::dataset {

using Pair = std::pair<flow::Condition, flow::ActionChunk>;

/// Pairs a clip of length `len` yields; 0 when too short.
constexpr int window_count(int len, int history, int horizon, int stride = 1) {
  const int span = len - history - horizon;
  return span < 0 ? 0 : span / stride + 1;
}

/// Anchor i covers observations [i-H+1, i] and actions [i+1, i+Tp].
inline std::vector<Pair> window(const DemoClip& clip, int history, int horizon, int stride = 1) {
  if (history < 1 || horizon < 1 || stride < 1)
    throw std::invalid_argument("window: H, Tp and stride must be positive");
  const int len = clip.size();
  const int need = history + horizon;
  if (len < need)
    throw std::invalid_argument("window: clip has " + std::to_string(len) +
                                " frames, needs at least H + Tp = " + std::to_string(need));
  std::vector<Pair> out;
  out.reserve(static_cast<std::size_t>(window_count(len, history, horizon, stride)));
  for (int i = history - 1; i + horizon < len; i += stride) {
    flow::Condition c;
    c.label = index_of(clip.emotion);
    c.num_labels = kNumEmotions;
    c.history.resize(history, kObsDim);
    for (int h = 0; h < history; ++h)
      c.history.row(h) = clip.frames[static_cast<std::size_t>(i - history + 1 + h)].observation().transpose();
    flow::ActionChunk a(horizon, kActDim);
    for (int k = 0; k < horizon; ++k)
      a.row(k) = clip.frames[static_cast<std::size_t>(i + 1 + k)].action().transpose();
    out.emplace_back(std::move(c), std::move(a));
  }
  return out;
}

/// Every clip's windows, concatenated in corpus order.
inline std::vector<Pair> window_corpus(const Corpus& clips, int history, int horizon, int stride = 1) {
  std::vector<Pair> all;
  for (const auto& c : clips) {
    auto w = window(c, history, horizon, stride);
    all.insert(all.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return all;
}

}  // namespace exflow::dataset
