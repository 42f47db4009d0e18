#pragma once

// JSON wire messages exchanged over the WebSocket, one document per text frame.

#include <exflow/dataset/clip_io.hpp>
#include <exflow/dataset/frame.hpp>
#include <exflow/emotion.hpp>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

namespace exflow::server {

using nlohmann::json;

enum class ErrorCode { kSeqOrder, kBadSchema, kNoModel };

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::kSeqOrder: return "SEQ_ORDER";
    case ErrorCode::kBadSchema: return "BAD_SCHEMA";
    case ErrorCode::kNoModel: return "NO_MODEL";
  }
  return "BAD_SCHEMA";
}

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorCode code, const std::string& detail) : std::runtime_error(detail), code_(code) {}
  [[nodiscard]] ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class Mode { kLog, kInfer };

inline std::string_view to_string(Mode m) { return m == Mode::kLog ? "log" : "infer"; }

struct Hello {
  Mode mode = Mode::kLog;
  Emotion emotion = Emotion::kCalm;
  std::string model;           ///< infer mode only
  std::optional<int> history;  ///< H the client expects
  std::optional<std::int64_t> seq;
};

struct Obs {
  std::int64_t seq = 0;
  dataset::Frame frame;
};

struct RecordMark {
  std::int64_t seq = 0;
};

struct SetEmotion {
  Emotion emotion = Emotion::kCalm;
  std::optional<std::int64_t> seq;
};

using Inbound = std::variant<Hello, Obs, RecordMark, SetEmotion>;

namespace detail {

[[noreturn]] inline void bad(const std::string& msg) { throw ProtocolError(ErrorCode::kBadSchema, msg); }

inline void only_fields(const json& j, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) bad("unexpected field '" + k + "'");
  }
}

inline std::int64_t int_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  if (!it->is_number_integer()) bad(std::string("field '") + key + "' must be an integer");
  return it->get<std::int64_t>();
}

inline std::optional<std::int64_t> opt_int(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return int_field(j, key);
}

inline std::string str_field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) bad(std::string("missing field '") + key + "'");
  if (!it->is_string()) bad(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline Emotion emotion_field(const json& j) {
  const auto s = str_field(j, "emotion");
  const auto e = try_parse_emotion(s);
  if (!e) bad("unknown emotion '" + s + "'");
  return *e;
}

}  // namespace detail

/// Parses and validates one inbound text frame. Throws ProtocolError with
/// BAD_SCHEMA for anything that is not a well-formed known message.
inline Inbound parse_inbound(std::string_view text) {
  using namespace detail;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    bad("message is not valid JSON");
  }
  if (!j.is_object()) bad("message must be a JSON object");
  const std::string type = str_field(j, "type");
  if (type == "hello") {
    only_fields(j, {"type", "mode", "emotion", "model", "H", "seq", "t_ms"});
    Hello h;
    const auto mode = str_field(j, "mode");
    if (mode == "log") {
      h.mode = Mode::kLog;
      h.emotion = emotion_field(j);
    } else if (mode == "infer") {
      h.mode = Mode::kInfer;
      h.model = str_field(j, "model");
      if (j.contains("emotion")) h.emotion = emotion_field(j);
    } else {
      bad("mode must be 'log' or 'infer'");
    }
    if (j.contains("H")) {
      const auto hv = int_field(j, "H");
      if (hv < 1) bad("H must be positive");
      h.history = static_cast<int>(hv);
    }
    h.seq = opt_int(j, "seq");
    (void)opt_int(j, "t_ms");
    return h;
  }
  if (type == "obs") {
    only_fields(j, {"type", "seq", "t_ms", "head", "hand_l", "hand_r", "face", "target"});
    Obs o;
    o.seq = int_field(j, "seq");
    try {
      o.frame = dataset::frame_from_json(j);
    } catch (const std::exception& e) {
      bad(e.what());
    }
    return o;
  }
  if (type == "record_mark") {
    only_fields(j, {"type", "seq", "t_ms"});
    (void)opt_int(j, "t_ms");
    return RecordMark{int_field(j, "seq")};
  }
  if (type == "set_emotion") {
    only_fields(j, {"type", "emotion", "seq", "t_ms"});
    (void)opt_int(j, "t_ms");
    return SetEmotion{emotion_field(j), opt_int(j, "seq")};
  }
  bad("unknown message type '" + type + "'");
}

/// Sequence number carried by an inbound message, if any.
inline std::optional<std::int64_t> inbound_seq(const Inbound& m) {
  return std::visit([](const auto& v) -> std::optional<std::int64_t> { return v.seq; }, m);
}

// Outbound messages. Every one carries the sender's seq and t_ms.

inline json act_message(std::int64_t seq, std::int64_t t_ms, const dataset::Frame& a) {
  return {{"type", "act"},
          {"seq", seq},
          {"t_ms", t_ms},
          {"head", a.head.to_vec6()},
          {"hand_l", a.hand_left.to_vec6()},
          {"hand_r", a.hand_right.to_vec6()},
          {"face", a.face.to_wire()}};
}

inline json error_message(std::int64_t seq, std::int64_t t_ms, ErrorCode code, const std::string& detail) {
  return {{"type", "error"}, {"seq", seq}, {"t_ms", t_ms}, {"code", std::string(to_string(code))}, {"detail", detail}};
}

}  // namespace exflow::server
