#pragma once

// One client connection's message loop, independent of the transport: feed it
// inbound text frames, send back whatever it returns.

#include <exflow/dataset/clip_io.hpp>
#include <exflow/eval.hpp>
#include <exflow/flow/artifact.hpp>
#include <exflow/runtime/controller.hpp>
#include <exflow/server/protocol.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace exflow::server {

struct ServerConfig {
  std::filesystem::path models_dir = "models";
  std::filesystem::path data_dir = "data";
  bool strict_marks = false;  ///< log only frames flagged by record_mark
  int inference_steps = 10;
  int execute = 0;            ///< Ta; 0 means Tp / 2
  std::uint64_t seed = 0;
};

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

using ServingModel = flow::FlowModel<float>;

/// Loaded models by id, shared read-only across sessions.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& id, std::shared_ptr<const ServingModel> m) {
    std::lock_guard lk(mu_);
    models_[id] = std::move(m);
  }

  /// Loads `<dir>/<id>` on first use. Throws NO_MODEL when it cannot.
  std::shared_ptr<const ServingModel> get(const std::string& id) {
    std::lock_guard lk(mu_);
    if (auto it = models_.find(id); it != models_.end()) return it->second;
    const std::filesystem::path rel(id);
    if (id.empty() || rel.is_absolute() || rel.has_parent_path() || id == "." || id == "..")
      throw ProtocolError(ErrorCode::kNoModel, "invalid model id '" + id + "'");
    const auto path = dir_ / rel;
    if (!std::filesystem::is_regular_file(path)) throw ProtocolError(ErrorCode::kNoModel, "no model '" + id + "'");
    try {
      auto m = std::make_shared<const ServingModel>(flow::load_artifact(path).model<float>());
      models_[id] = m;
      return m;
    } catch (const std::exception& e) {
      throw ProtocolError(ErrorCode::kNoModel, "model '" + id + "' failed to load: " + e.what());
    }
  }

  [[nodiscard]] std::vector<std::string> loaded() const {
    std::lock_guard lk(mu_);
    std::vector<std::string> ids;
    for (const auto& [k, v] : models_) ids.push_back(k);
    return ids;
  }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const ServingModel>> models_;
};

struct SessionInfo {
  std::uint64_t id = 0;
  bool active = true;
  std::optional<Mode> mode;
  Emotion emotion = Emotion::kCalm;
  std::string model;
  std::string clip;
  std::uint64_t received = 0;  ///< obs messages accepted
  std::uint64_t written = 0;   ///< frames persisted
  std::uint64_t marks = 0;
  std::uint64_t actions = 0;
  std::uint64_t errors = 0;
  runtime::Metrics runtime;
  eval::LatencyStats latency;  ///< obs received -> act produced

  [[nodiscard]] json to_json() const {
    json j = {{"id", id},
              {"active", active},
              {"mode", mode ? std::string(to_string(*mode)) : std::string("pending")},
              {"emotion", std::string(exflow::to_string(emotion))},
              {"received", received},
              {"written", written},
              {"marks", marks},
              {"actions", actions},
              {"errors", errors},
              {"replans", runtime.replans},
              {"overruns", runtime.overruns},
              {"mean_sample_ms", runtime.mean_sample_ms},
              {"latency_p95_ms", latency.p95_ms}};
    j["model"] = model;
    j["clip"] = clip;
    return j;
  }
};

class Session {
 public:
  struct Reply {
    std::vector<std::string> messages;
    bool close = false;
  };

  Session(std::uint64_t id, const ServerConfig& cfg, ModelRegistry& models)
      : cfg_(cfg), models_(&models) {
    info_.id = id;
  }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;
  ~Session() { finish(); }

  Reply handle(std::string_view text) {
    std::lock_guard lk(mu_);
    Reply r;
    if (closed_) return r;
    try {
      const Inbound msg = parse_inbound(text);
      if (const auto s = inbound_seq(msg)) {
        if (last_seq_ && *s <= *last_seq_) {
          ++info_.errors;
          r.messages.push_back(error(ErrorCode::kSeqOrder, "seq " + std::to_string(*s) +
                                                               " does not follow " + std::to_string(*last_seq_)));
          return r;
        }
        last_seq_ = s;
      }
      std::visit([&](const auto& m) { on(m, r); }, msg);
    } catch (const ProtocolError& e) {
      ++info_.errors;
      r.messages.push_back(error(e.code(), e.what()));
      r.close = e.code() != ErrorCode::kSeqOrder;
    } catch (const std::exception& e) {
      ++info_.errors;
      r.messages.push_back(error(ErrorCode::kBadSchema, e.what()));
      r.close = true;
    }
    if (r.close) finish_locked();
    return r;
  }

  /// Flushes and closes the clip; further messages are ignored.
  void finish() {
    std::lock_guard lk(mu_);
    finish_locked();
  }

  [[nodiscard]] SessionInfo info() const {
    std::lock_guard lk(mu_);
    SessionInfo i = info_;
    if (controller_) i.runtime = controller_->metrics();
    i.latency = eval::summarize_latency(latencies_);
    return i;
  }

 private:
  std::string error(ErrorCode c, const std::string& detail) {
    return error_message(out_seq_++, now_ms(), c, detail).dump();
  }

  std::string status() {
    SessionInfo i = info_;
    if (controller_) i.runtime = controller_->metrics();
    i.latency = eval::summarize_latency(latencies_);
    return json{{"type", "status"},
                {"seq", out_seq_++},
                {"t_ms", now_ms()},
                {"tick_ms", dataset::kNominalPeriodMs},
                {"session", i.to_json()}}
        .dump();
  }

  void on(const Hello& h, Reply& r) {
    if (info_.mode) throw ProtocolError(ErrorCode::kBadSchema, "hello sent twice");
    if (h.mode == Mode::kInfer) {
      auto model = models_->get(h.model);
      if (h.history && *h.history != model->config().history)
        throw ProtocolError(ErrorCode::kBadSchema, "model '" + h.model + "' uses H=" +
                                                       std::to_string(model->config().history));
      runtime::ControllerConfig cc = runtime::controller_config_for(model->config(), cfg_.execute);
      controller_.emplace(cc, runtime::model_planner(model, cfg_.inference_steps, cfg_.seed + info_.id), h.emotion);
      info_.model = h.model;
    } else {
      open_clip(h.emotion);
    }
    info_.mode = h.mode;
    info_.emotion = h.emotion;
    r.messages.push_back(status());
  }

  void on(const Obs& o, Reply& r) {
    require_hello();
    const auto rx = std::chrono::steady_clock::now();
    ++info_.received;
    if (*info_.mode == Mode::kLog) {
      flush_pending();
      pending_ = o.frame;
      pending_->rx_ms = now_ms();
      return;
    }
    const auto a = controller_->push_observation(o.frame.observation());
    if (!a) return;
    dataset::Frame f = dataset::Frame::from_action(*a);
    r.messages.push_back(act_message(out_seq_++, now_ms(), f).dump());
    ++info_.actions;
    latencies_.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - rx).count());
  }

  void on(const RecordMark&, Reply& r) {
    require_hello();
    ++info_.marks;
    if (*info_.mode == Mode::kLog) {
      if (!pending_) throw ProtocolError(ErrorCode::kBadSchema, "record_mark before any obs");
      pending_->mark = true;
    }
    r.messages.push_back(status());
  }

  void on(const SetEmotion& s, Reply& r) {
    require_hello();
    if (*info_.mode == Mode::kLog) {
      ++info_.errors;
      r.messages.push_back(error(ErrorCode::kBadSchema, "set_emotion is only valid in infer mode"));
      return;
    }
    controller_->set_emotion(s.emotion);
    info_.emotion = s.emotion;
    r.messages.push_back(status());
  }

  void require_hello() const {
    if (!info_.mode) throw ProtocolError(ErrorCode::kBadSchema, "first message must be hello");
  }

  void open_clip(Emotion e) {
    dataset::DemoClip header;
    header.emotion = e;
    header.meta = {dataset::Source::kHuman, info_.id, std::to_string(now_ms())};
    std::filesystem::create_directories(cfg_.data_dir);
    // one file per session; bump the seed field until the name is unused
    auto path = cfg_.data_dir / header.file_name();
    while (std::filesystem::exists(path)) {
      header.meta.seed += 1000000;
      path = cfg_.data_dir / header.file_name();
    }
    clip_.open(path, std::ios::binary | std::ios::trunc);
    if (!clip_) throw std::runtime_error("cannot create clip " + path.string());
    clip_ << dataset::header_json(header).dump() << '\n';
    clip_.flush();
    info_.clip = path.string();
  }

  void flush_pending() {
    if (!pending_) return;
    if (!cfg_.strict_marks || pending_->mark) {
      clip_ << dataset::frame_json(*pending_).dump() << '\n';
      clip_.flush();
      ++info_.written;
    }
    pending_.reset();
  }

  void finish_locked() {
    if (closed_) return;
    closed_ = true;
    if (clip_.is_open()) {
      flush_pending();
      clip_.close();
    }
    info_.active = false;
  }

  ServerConfig cfg_;
  ModelRegistry* models_;
  mutable std::mutex mu_;
  SessionInfo info_;
  std::optional<std::int64_t> last_seq_;
  std::int64_t out_seq_ = 0;
  std::optional<runtime::Controller> controller_;
  std::vector<double> latencies_;
  std::ofstream clip_;
  std::optional<dataset::Frame> pending_;
  bool closed_ = false;
};

/// Everything the status endpoint reports.
class ServerState {
 public:
  explicit ServerState(ServerConfig cfg) : cfg_(std::move(cfg)), models_(cfg_.models_dir) {}

  std::shared_ptr<Session> open_session() {
    std::lock_guard lk(mu_);
    auto s = std::make_shared<Session>(++next_id_, cfg_, models_);
    sessions_.push_back(s);
    return s;
  }

  [[nodiscard]] json status() const {
    std::vector<std::shared_ptr<Session>> ss;
    {
      std::lock_guard lk(mu_);
      ss = sessions_;
    }
    json list = json::array();
    int active = 0;
    for (const auto& s : ss) {
      const auto i = s->info();
      active += i.active ? 1 : 0;
      list.push_back(i.to_json());
    }
    return {{"active_sessions", active}, {"sessions", list}, {"models", models_.loaded()}};
  }

  ModelRegistry& models() { return models_; }
  [[nodiscard]] const ServerConfig& config() const { return cfg_; }

 private:
  ServerConfig cfg_;
  ModelRegistry models_;
  mutable std::mutex mu_;
  std::uint64_t next_id_ = 0;
  std::vector<std::shared_ptr<Session>> sessions_;
};

}  // namespace exflow::server
