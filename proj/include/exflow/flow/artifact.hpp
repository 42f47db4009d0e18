#pragma once

// Model file layout (little-endian):
//   8 bytes   magic "EXFLOWMD"
//   uint32    format version
//   uint64    header length, then that many bytes of JSON
//             {config, norm, precision, meta}
//   uint64    parameter count, then that many float64 values

#include <exflow/flow/model.hpp>

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace exflow::flow {

inline constexpr char kArtifactMagic[8] = {'E', 'X', 'F', 'L', 'O', 'W', 'M', 'D'};
inline constexpr std::uint32_t kArtifactVersion = 1;

static_assert(std::endian::native == std::endian::little, "artifact I/O assumes little-endian");

struct Artifact {
  ModelParams<double> params;
  NormStats stats;
  std::string precision = "float64";  ///< precision the weights were trained in
  nlohmann::json meta = nlohmann::json::object();

  [[nodiscard]] const ModelConfig& config() const { return params.config(); }

  template <class S>
  [[nodiscard]] FlowModel<S> model() const {
    return FlowModel<S>(params.template cast<S>(), stats);
  }
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"action_dim", c.action_dim},     {"horizon", c.horizon},
          {"obs_dim", c.obs_dim},           {"history", c.history},
          {"num_labels", c.num_labels},     {"widths", c.widths},
          {"groups", c.groups},             {"time_embed_dim", c.time_embed_dim},
          {"time_hidden", c.time_hidden},   {"cond_hidden", c.cond_hidden},
          {"cond_embed_dim", c.cond_embed_dim}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.action_dim = j.at("action_dim").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.obs_dim = j.at("obs_dim").get<int>();
  c.history = j.at("history").get<int>();
  c.num_labels = j.at("num_labels").get<int>();
  c.widths = j.at("widths").get<std::vector<int>>();
  c.groups = j.at("groups").get<int>();
  c.time_embed_dim = j.at("time_embed_dim").get<int>();
  c.time_hidden = j.at("time_hidden").get<int>();
  c.cond_hidden = j.at("cond_hidden").get<int>();
  c.cond_embed_dim = j.at("cond_embed_dim").get<int>();
  c.validate();
  return c;
}

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Eigen::VectorXd vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline nlohmann::json range_json(const Range& r) { return {{"min", vec_json(r.min)}, {"max", vec_json(r.max)}}; }

inline Range range_from(const nlohmann::json& j) {
  Range r{vec_from(j.at("min")), vec_from(j.at("max"))};
  if (r.min.size() != r.max.size()) throw std::runtime_error("artifact: norm min/max sizes differ");
  if (!(r.max.array() >= r.min.array()).all()) throw std::runtime_error("artifact: norm max < min");
  return r;
}

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error(std::string("artifact: truncated ") + what);
  return v;
}

}  // namespace detail

inline void write_artifact(std::ostream& os, const Artifact& a) {
  nlohmann::json h = {{"config", config_to_json(a.config())},
                      {"norm", {{"obs", detail::range_json(a.stats.obs)}, {"act", detail::range_json(a.stats.act)}}},
                      {"precision", a.precision},
                      {"meta", a.meta}};
  const std::string hs = h.dump();
  os.write(kArtifactMagic, sizeof kArtifactMagic);
  detail::put(os, kArtifactVersion);
  detail::put(os, static_cast<std::uint64_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  const auto& v = a.params.values();
  detail::put(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline Artifact read_artifact(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kArtifactMagic, sizeof magic) != 0)
    throw std::runtime_error("artifact: not a model file");
  const auto version = detail::get<std::uint32_t>(is, "version");
  if (version != kArtifactVersion)
    throw std::runtime_error("artifact: unsupported format version " + std::to_string(version));
  const auto hlen = detail::get<std::uint64_t>(is, "header length");
  if (hlen > (1u << 24)) throw std::runtime_error("artifact: header too large");
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw std::runtime_error("artifact: truncated header");
  const auto h = nlohmann::json::parse(hs);

  Artifact a;
  a.params = ModelParams<double>(std::make_shared<const nn::UNet>(config_from_json(h.at("config"))));
  a.stats = {detail::range_from(h.at("norm").at("obs")), detail::range_from(h.at("norm").at("act"))};
  a.precision = h.value("precision", std::string("float64"));
  a.meta = h.value("meta", nlohmann::json::object());
  const auto n = detail::get<std::uint64_t>(is, "parameter count");
  if (n != a.params.size())
    throw std::runtime_error("artifact: parameter count " + std::to_string(n) + " does not match config (" +
                             std::to_string(a.params.size()) + ")");
  is.read(reinterpret_cast<char*>(a.params.values().data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("artifact: truncated parameters");
  if (!a.params.values().allFinite()) throw std::runtime_error("artifact: non-finite parameters");
  // validates norm dims against the config
  (void)FlowModel<double>(a.params, a.stats);
  return a;
}

inline void save_artifact(const std::filesystem::path& path, const Artifact& a) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_artifact(os, a);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

inline Artifact load_artifact(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model " + path.string());
  return read_artifact(is);
}

}  // namespace exflow::flow
