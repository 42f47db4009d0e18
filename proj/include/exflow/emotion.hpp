#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace exflow {

/// The seven demonstrated emotions. The numeric order is the one-hot index
/// and must never change.
enum class Emotion : int { kHappy = 0, kSad, kAngry, kFear, kBored, kCurious, kCalm };

inline constexpr int kNumEmotions = 7;

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "happy", "sad", "angry", "fear", "bored", "curious", "calm"};

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions = {
    Emotion::kHappy, Emotion::kSad,     Emotion::kAngry, Emotion::kFear,
    Emotion::kBored, Emotion::kCurious, Emotion::kCalm};

constexpr int index_of(Emotion e) { return static_cast<int>(e); }

inline std::string_view to_string(Emotion e) { return kEmotionNames.at(index_of(e)); }

inline std::optional<Emotion> try_parse_emotion(std::string_view s) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == s) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

inline Emotion parse_emotion(std::string_view s) {
  if (auto e = try_parse_emotion(s)) return *e;
  throw std::invalid_argument("unknown emotion '" + std::string(s) + "'");
}

inline Emotion emotion_from_index(int i) {
  if (i < 0 || i >= kNumEmotions) throw std::out_of_range("emotion index out of range");
  return static_cast<Emotion>(i);
}

}  // namespace exflow
