#pragma once

// Clip files: one JSON header line, then one JSON object per frame.

#include <exflow/dataset/frame.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace exflow::dataset {

inline constexpr const char* kClipSchema = "expressive-flow/clip/v1";

/// A problem in a clip file, located by file and 1-based line.
class ClipError : public std::runtime_error {
 public:
  ClipError(std::string file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  [[nodiscard]] const std::string& file() const { return file_; }
  [[nodiscard]] int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

namespace detail {

using nlohmann::json;

template <std::size_t N>
json array_json(const std::array<double, N>& a) {
  for (double x : a) {
    if (!std::isfinite(x)) throw std::invalid_argument("clip: refusing to write a non-finite value");
  }
  return json(a);
}

template <std::size_t N>
std::array<double, N> read_array(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  if (!it->is_array() || it->size() != N)
    throw std::invalid_argument(std::string("field '") + key + "' must be an array of " +
                                std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const auto& v = (*it)[i];
    if (!v.is_number()) throw std::invalid_argument(std::string("field '") + key + "' has a non-number");
    out[i] = v.get<double>();
    if (!std::isfinite(out[i])) throw std::invalid_argument(std::string("field '") + key + "' is not finite");
  }
  return out;
}

inline std::int64_t read_int(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw std::invalid_argument(std::string("missing field '") + key + "'");
  if (!it->is_number_integer()) throw std::invalid_argument(std::string("field '") + key + "' must be an integer");
  return it->get<std::int64_t>();
}

inline Pose pose_from(const std::array<double, 6>& a) { return {Vec3(a[0], a[1], a[2]), Vec3(a[3], a[4], a[5])}; }

}  // namespace detail

inline nlohmann::json header_json(const DemoClip& clip) {
  nlohmann::json h = {{"schema", kClipSchema},
                      {"emotion", std::string(to_string(clip.emotion))},
                      {"source", to_string(clip.meta.source)},
                      {"seed", clip.meta.seed}};
  if (!clip.meta.created_at.empty()) h["created_at"] = clip.meta.created_at;
  return h;
}

inline nlohmann::json frame_json(const Frame& f) {
  using detail::array_json;
  nlohmann::json j = {{"t_ms", f.t_ms},
                      {"head", array_json(f.head.to_vec6())},
                      {"hand_l", array_json(f.hand_left.to_vec6())},
                      {"hand_r", array_json(f.hand_right.to_vec6())},
                      {"face", array_json(f.face.to_wire())},
                      {"target", array_json(std::array<double, 3>{f.target.x(), f.target.y(), f.target.z()})}};
  if (f.mark) j["mark"] = true;
  if (f.rx_ms) j["rx_ms"] = *f.rx_ms;
  return j;
}

/// Parses the per-frame fields shared by clip lines and `obs` messages.
/// Poses are kept exactly as written.
inline Frame frame_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("frame must be a JSON object");
  Frame f;
  f.t_ms = detail::read_int(j, "t_ms");
  f.head = detail::pose_from(detail::read_array<6>(j, "head"));
  f.hand_left = detail::pose_from(detail::read_array<6>(j, "hand_l"));
  f.hand_right = detail::pose_from(detail::read_array<6>(j, "hand_r"));
  const auto face = detail::read_array<7>(j, "face");
  f.face = FaceDofs::from_wire(face);
  const auto tg = detail::read_array<3>(j, "target");
  f.target = Vec3(tg[0], tg[1], tg[2]);
  if (const auto it = j.find("mark"); it != j.end()) {
    if (!it->is_boolean()) throw std::invalid_argument("field 'mark' must be a boolean");
    f.mark = it->get<bool>();
  }
  if (j.contains("rx_ms")) f.rx_ms = detail::read_int(j, "rx_ms");
  return f;
}

inline void write_clip(std::ostream& os, const DemoClip& clip) {
  os << header_json(clip).dump() << '\n';
  for (const auto& f : clip.frames) os << frame_json(f).dump() << '\n';
}

/// Writes `<dir>/<emotion>_<seed>.jsonl` and returns its path.
inline std::filesystem::path save_clip(const std::filesystem::path& dir, const DemoClip& clip) {
  std::filesystem::create_directories(dir);
  const auto path = dir / clip.file_name();
  std::ostringstream buf;
  write_clip(buf, clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << buf.str();
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
  return path;
}

struct LoadResult {
  DemoClip clip;                 ///< everything read before the first error
  std::optional<ClipError> error;
};

/// Reads what it can; stops at the first bad line and reports it.
inline LoadResult load_clip_partial(std::istream& in, const std::string& name) {
  LoadResult r;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  const auto fail = [&](const std::string& msg) { r.error.emplace(name, lineno, msg); };
  while (std::getline(in, line)) {
    ++lineno;
    const bool last = in.peek() == std::char_traits<char>::eof();
    if (line.empty()) {
      if (last) break;
      fail("empty line");
      return r;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed JSON") + (in.eof() ? " (truncated line)" : "") + ": " + e.what());
      return r;
    }
    try {
      if (!have_header) {
        if (!j.is_object() || j.value("schema", std::string{}) != kClipSchema)
          throw std::invalid_argument(std::string("header must declare schema ") + kClipSchema);
        r.clip.emotion = parse_emotion(j.at("emotion").get<std::string>());
        r.clip.meta.source = parse_source(j.at("source").get<std::string>());
        r.clip.meta.seed = j.at("seed").get<std::uint64_t>();
        r.clip.meta.created_at = j.value("created_at", std::string{});
        have_header = true;
        continue;
      }
      Frame f = frame_from_json(j);
      if (!r.clip.frames.empty() && f.t_ms <= r.clip.frames.back().t_ms)
        throw std::invalid_argument("timestamps must strictly increase");
      r.clip.frames.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      fail(e.what());
      return r;
    } catch (const std::invalid_argument& e) {
      fail(e.what());
      return r;
    }
  }
  if (!have_header) {
    lineno = std::max(lineno, 1);
    fail("missing header line");
  }
  return r;
}

inline LoadResult load_clip_partial(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    LoadResult r;
    r.error.emplace(path.string(), 0, "cannot open file");
    return r;
  }
  return load_clip_partial(in, path.string());
}

/// Throws ClipError on the first problem.
inline DemoClip load_clip(const std::filesystem::path& path) {
  auto r = load_clip_partial(path);
  if (r.error) throw *r.error;
  return std::move(r.clip);
}

/// Every *.jsonl in `dir`, sorted by file name. A missing directory is an
/// error; an empty one is an empty corpus.
inline Corpus load_corpus(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus c;
  c.reserve(files.size());
  for (const auto& f : files) c.push_back(load_clip(f));
  return c;
}

inline void save_corpus(const std::filesystem::path& dir, const Corpus& clips) {
  for (const auto& c : clips) save_clip(dir, c);
}

}  // namespace exflow::dataset
