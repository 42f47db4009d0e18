#pragma once

// The `exflow` command line: synth, train, eval, serve, replay.
//
// Exit codes: 0 ok, 2 bad flags, 3 data error, 4 training divergence.
// `--config FILE` reads a flat JSON object of flag values; flags given on the
// command line win.

#include <exflow/dataset/clip_io.hpp>
#include <exflow/dataset/synth.hpp>
#include <exflow/eval.hpp>
#include <exflow/pipeline.hpp>
#include <exflow/server/ws_server.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <boost/asio/signal_set.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace exflow::cli {

enum Exit : int { kOk = 0, kFailure = 1, kBadFlags = 2, kDataError = 3, kDiverged = 4 };

/// Invalid input data (corpus, clip, model file, output location).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flag-level problem found after parsing.
class FlagError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat JSON object -> CLI11 config items, routed to the selected subcommand.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}

  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const auto& name = opt->get_lnames().front();
      if (opt->count() > 0) {
        const auto& r = opt->results();
        j[name] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<std::string> parents;
    if (root_ && !root_->get_subcommands().empty()) parents.push_back(root_->get_subcommands().front()->get_name());
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, v] : j.items()) {
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(key, e));
      } else {
        item.inputs.push_back(scalar(key, v));
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  static std::string scalar(const std::string& key, const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number()) return v.dump();
    throw CLI::ConversionError("config key '" + key + "' must be a string, number, boolean or array");
  }

  const CLI::App* root_;
};

namespace detail {

inline dataset::Corpus load_corpus_or_throw(const std::string& dir) {
  try {
    return dataset::load_corpus(dir);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + p.string());
  os << text;
  if (!os) throw DataError("write failed: " + p.string());
}

inline std::string loss_csv(const std::vector<double>& loss) {
  std::ostringstream os;
  os << "epoch,mean_loss\n" << std::setprecision(17);
  for (std::size_t e = 0; e < loss.size(); ++e) os << e << ',' << loss[e] << '\n';
  return os.str();
}

inline nlohmann::json latency_json(const eval::LatencyStats& s) {
  return {{"calls", s.calls}, {"mean_ms", s.mean_ms}, {"p50_ms", s.p50_ms}, {"p95_ms", s.p95_ms}, {"max_ms", s.max_ms}};
}

inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int clips = 10;
  int frames = 300;
  std::uint64_t seed = 0;
  double noise = 1.0;
  double poke_weight = 1.0;
};

inline int run_synth(const SynthArgs& a, std::ostream& out) {
  if (a.clips <= 0) throw FlagError("nothing to generate: --clips-per-emotion must be at least 1");
  if (a.frames <= 0) throw FlagError("nothing to generate: --frames must be at least 1");
  if (a.noise < 0.0) throw FlagError("--noise must be non-negative");
  dataset::SynthOptions opt;
  opt.noise = a.noise;
  opt.poke_weight = a.poke_weight;
  const auto corpus = dataset::synth_corpus(a.clips, a.frames, a.seed, opt);
  try {
    dataset::save_corpus(a.out, corpus);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  std::size_t frames = 0;
  for (const auto& c : corpus) frames += c.frames.size();
  out << "wrote " << corpus.size() << " clips (" << a.clips << " per emotion), " << frames << " frames to " << a.out
      << '\n';
  return kOk;
}

struct TrainArgs {
  std::string data, out, loss_csv, preset, precision;
  int epochs = 3000, batch = 256, history = 2, horizon = 16, log_every = 10;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::vector<int> widths;
  const CLI::App* app = nullptr;  ///< to tell explicit flags from defaults
};

inline bool given(const CLI::App* app, const char* flag) { return app && app->count(flag) > 0; }

inline TrainOptions resolve_train_options(const TrainArgs& a) {
  TrainOptions o;
  if (!a.preset.empty()) {
    const auto p = find_preset(a.preset);
    if (!p) throw FlagError("unknown preset '" + a.preset + "' (paper, desk, smoke)");
    o = p->options;
  }
  auto& t = o.train;
  if (!a.app || given(a.app, "--epochs")) t.epochs = a.epochs;
  if (!a.app || given(a.app, "--batch")) t.batch_size = a.batch;
  if (!a.app || given(a.app, "--lr")) t.learning_rate = a.lr;
  if (!a.app || given(a.app, "--H")) t.history = a.history;
  if (!a.app || given(a.app, "--tp")) t.horizon = a.horizon;
  t.seed = a.seed;
  if (!a.widths.empty()) o.widths = a.widths;
  if (!a.precision.empty()) o.precision = parse_precision(a.precision);
  try {
    t.validate_policy();
    model_config_for(o).validate();
  } catch (const std::invalid_argument& e) {
    throw FlagError(e.what());
  }
  return o;
}

inline int run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const TrainOptions o = resolve_train_options(a);
  const auto corpus = detail::load_corpus_or_throw(a.data);
  if (corpus.empty()) throw DataError("no clips in " + a.data);
  for (const auto& c : corpus) {
    if (c.size() < o.train.history + o.train.horizon)
      throw DataError("clip " + c.file_name() + " has " + std::to_string(c.size()) + " frames, needs at least H + Tp = " +
                      std::to_string(o.train.history + o.train.horizon));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
  TrainOutcome res = train_model(corpus, o, [&](int e, double loss) {
    if (a.log_every > 0 && (e % a.log_every == 0 || e + 1 == o.train.epochs))
      err << "epoch " << e << " loss " << loss << " (" << std::fixed << std::setprecision(1) << elapsed() << " s)\n"
          << std::defaultfloat << std::setprecision(6);
  });
  const std::string csv_path = a.loss_csv.empty() ? a.out + ".loss.csv" : a.loss_csv;
  detail::write_text(csv_path, detail::loss_csv(res.result.epoch_loss));
  if (res.result.diverged) {
    err << "training diverged at epoch " << res.result.epoch_loss.size() - 1 << "; no model written\n";
    return kDiverged;
  }
  res.artifact.meta["train_seconds"] = elapsed();
  try {
    flow::save_artifact(a.out, res.artifact);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const auto& L = res.result.epoch_loss;
  out << "trained " << L.size() << " epochs on " << res.pairs << " windows in " << std::fixed << std::setprecision(1)
      << elapsed() << " s; loss " << std::defaultfloat << std::setprecision(6) << L.front() << " -> " << L.back()
      << "\nmodel: " << a.out << "\nloss curve: " << csv_path << '\n';
  return kOk;
}

struct EvalArgs {
  std::string model, data, report, plots;
  int rollouts = 10, frames = 300, steps = 0, ta = 0, latency_calls = 200;
  std::uint64_t seed = 0;
};

struct EvalResult {
  nlohmann::json report;
  std::vector<dataset::DemoClip> rollouts;
};

/// Rollouts of a model on fresh target paths, classified against the corpus.
inline EvalResult evaluate(const flow::Artifact& art, const dataset::Corpus& corpus, const EvalArgs& a) {
  if (a.rollouts < 1 || a.frames < 1 || a.latency_calls < 0 || a.steps < 0 || a.ta < 0)
    throw FlagError("eval: counts must be positive");
  const int steps = a.steps > 0 ? a.steps : art.meta.value("inference_steps", 10);
  auto model = std::make_shared<const server::ServingModel>(art.model<float>());
  const auto cc = runtime::controller_config_for(model->config(), a.ta);
  if (cc.ta() > cc.horizon) throw FlagError("eval: --ta must not exceed the model's Tp");
  const NormStats stats = dataset::compute_norm_stats(corpus);
  const eval::CentroidClassifier clf(corpus, stats.act);

  eval::Confusion conf;
  EvalResult res;
  runtime::Metrics total;
  for (Emotion e : kAllEmotions) {
    for (int k = 0; k < a.rollouts; ++k) {
      const auto path = dataset::mouse_trajectory(eval::fresh_path_seed(a.seed, e, k), a.frames / 10.0);
      runtime::Controller ctl(cc, runtime::model_planner(model, steps, eval::fresh_path_seed(a.seed + 1, e, k)), e);
      auto clip = eval::rollout(ctl, e, path);
      if (clip.frames.empty()) throw FlagError("eval: --frames shorter than the model's history");
      conf.add(e, clf.classify(clip));
      total.frames += ctl.metrics().frames;
      total.replans += ctl.metrics().replans;
      total.overruns += ctl.metrics().overruns;
      res.rollouts.push_back(std::move(clip));
    }
  }

  nlohmann::json per = nlohmann::json::object();
  for (Emotion e : kAllEmotions) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dataset::kActDim);
    double reach = 0.0;
    std::size_t n = 0;
    for (const auto& r : res.rollouts) {
      if (r.emotion != e) continue;
      for (const auto& f : r.frames) {
        mean += f.action();
        reach += (f.hand_right.position - f.target).norm();
        ++n;
      }
    }
    mean /= static_cast<double>(std::max<std::size_t>(n, 1));
    per[std::string(to_string(e))] = {{"accuracy", conf.accuracy(e)},
                                      {"mean_face", detail::vec_json(mean.tail(7))},
                                      {"mean_hand_r_target_dist", reach / static_cast<double>(std::max<std::size_t>(n, 1))}};
  }

  flow::Condition cond;
  cond.label = 0;
  cond.num_labels = model->config().num_labels;
  cond.history = Eigen::MatrixXd::Zero(model->config().history, model->config().obs_dim);
  for (int h = 0; h < model->config().history; ++h) cond.history.row(h) = corpus.front().frames.front().observation().transpose();
  const auto lat = a.latency_calls > 0 ? eval::time_sampling(*model, cond, steps, a.latency_calls, a.seed)
                                       : eval::LatencyStats{};

  nlohmann::json labels = nlohmann::json::array();
  for (auto n : kEmotionNames) labels.push_back(std::string(n));
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : conf.counts) matrix.push_back(row);
  res.report = {{"schema", "expressive-flow/eval/v1"},
                {"model", {{"H", model->config().history},
                           {"Tp", model->config().horizon},
                           {"widths", model->config().widths},
                           {"precision", art.precision}}},
                {"settings", {{"rollouts_per_emotion", a.rollouts},
                              {"frames", a.frames},
                              {"inference_steps", steps},
                              {"Ta", cc.ta()},
                              {"seed", a.seed}}},
                {"separability", conf.accuracy()},
                {"corpus_separability", eval::leave_one_out(corpus, stats.act).accuracy()},
                {"labels", labels},
                {"confusion", matrix},
                {"per_emotion", per},
                {"latency", detail::latency_json(lat)},
                {"closed_loop", {{"actions", total.frames}, {"replans", total.replans}, {"overruns", total.overruns}}}};
  return res;
}

inline void write_plots(const std::filesystem::path& dir, const EvalResult& r, const std::string& model_path) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string());
  for (Emotion e : kAllEmotions) {
    const auto it = std::find_if(r.rollouts.begin(), r.rollouts.end(), [&](const auto& c) { return c.emotion == e; });
    if (it == r.rollouts.end()) continue;
    std::ostringstream os;
    os << "t_ms";
    for (const char* n : dataset::kActionNames) os << ',' << n;
    os << ",target_x,target_y,target_z\n" << std::setprecision(10);
    for (const auto& f : it->frames) {
      os << f.t_ms;
      const auto v = f.action();
      for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << v[i];
      os << ',' << f.target.x() << ',' << f.target.y() << ',' << f.target.z() << '\n';
    }
    detail::write_text(dir / ("traces_" + std::string(to_string(e)) + ".csv"), os.str());
  }
  const std::filesystem::path loss = model_path + ".loss.csv";
  if (std::filesystem::is_regular_file(loss))
    std::filesystem::copy_file(loss, dir / "loss_curve.csv", std::filesystem::copy_options::overwrite_existing, ec);
}

inline int run_eval(const EvalArgs& a, std::ostream& out) {
  flow::Artifact art;
  try {
    art = flow::load_artifact(a.model);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const auto corpus = detail::load_corpus_or_throw(a.data);
  if (corpus.empty()) throw DataError("no clips in " + a.data);
  const auto res = evaluate(art, corpus, a);
  detail::write_text(a.report, res.report.dump(2) + "\n");
  if (!a.plots.empty()) write_plots(a.plots, res, a.model);
  out << "separability " << res.report["separability"].get<double>() << " (corpus "
      << res.report["corpus_separability"].get<double>() << "), sample p95 "
      << res.report["latency"]["p95_ms"].get<double>() << " ms\nreport: " << a.report << '\n';
  return kOk;
}

struct ServeArgs {
  std::string address = "127.0.0.1", models_dir = "models", data_dir = "data";
  int port = 8765, steps = 10, ta = 0;
  bool strict_marks = false;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
};

inline int run_serve(const ServeArgs& a, std::ostream& out) {
  server::ServerConfig cfg;
  cfg.models_dir = a.models_dir;
  cfg.data_dir = a.data_dir;
  cfg.strict_marks = a.strict_marks;
  cfg.inference_steps = a.steps;
  cfg.execute = a.ta;
  cfg.seed = a.seed;
  server::WsServer srv(cfg);
  unsigned short port = 0;
  try {
    port = srv.start(a.address, static_cast<unsigned short>(a.port));
  } catch (const std::exception& e) {
    throw FlagError("cannot listen on " + a.address + ":" + std::to_string(a.port) + ": " + e.what());
  }
  out << "listening on ws://" << a.address << ':' << port << "/ (status: http://" << a.address << ':' << port
      << "/status)" << std::endl;
  boost::asio::io_context ioc;
  boost::asio::signal_set signals(ioc, SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code&, int) { ioc.stop(); });
  if (a.duration_s > 0) {
    ioc.run_for(std::chrono::milliseconds(static_cast<long long>(a.duration_s * 1000.0)));
  } else {
    ioc.run();
  }
  srv.stop();
  out << "stopped; " << srv.state().status()["sessions"].size() << " session(s) served" << std::endl;
  return kOk;
}

struct ReplayArgs {
  std::string clip, model, emotion;
  double speed = 0.0;
  int history = 2, horizon = 16, ta = 0, steps = 10;
  std::uint64_t seed = 0;
};

/// Feeds a recorded clip through a controller and prints each action as a
/// JSON line. Without a model the planner replays the clip's own next actions.
inline int run_replay(const ReplayArgs& a, std::ostream& out, std::ostream& err) {
  if (a.speed < 0.0) throw FlagError("--speed must be >= 0");
  dataset::DemoClip clip;
  try {
    clip = dataset::load_clip(a.clip);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  Emotion emotion = clip.emotion;
  if (!a.emotion.empty()) {
    const auto e = try_parse_emotion(a.emotion);
    if (!e) throw FlagError("unknown emotion '" + a.emotion + "'");
    emotion = *e;
  }
  std::optional<runtime::Controller> ctl;
  std::size_t cursor = 0;  // index of the frame being observed
  if (!a.model.empty()) {
    flow::Artifact art;
    try {
      art = flow::load_artifact(a.model);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    auto model = std::make_shared<const server::ServingModel>(art.model<float>());
    ctl.emplace(runtime::controller_config_for(model->config(), a.ta), runtime::model_planner(model, a.steps, a.seed),
                emotion);
  } else {
    runtime::ControllerConfig cc;
    cc.history = a.history;
    cc.horizon = a.horizon;
    cc.execute = a.ta;
    try {
      cc.validate();
    } catch (const std::invalid_argument& e) {
      throw FlagError(e.what());
    }
    ctl.emplace(cc,
                [&clip, &cursor, tp = a.horizon](const flow::Condition&) {
                  flow::ActionChunk c(tp, dataset::kActDim);
                  for (int k = 0; k < tp; ++k) {
                    const std::size_t i = std::min(cursor + 1 + static_cast<std::size_t>(k), clip.frames.size() - 1);
                    c.row(k) = clip.frames[i].action().transpose();
                  }
                  return c;
                },
                emotion);
  }
  std::int64_t seq = 0;
  for (cursor = 0; cursor < clip.frames.size(); ++cursor) {
    const auto& f = clip.frames[cursor];
    if (const auto act = ctl->push_observation(f.observation()))
      out << server::act_message(seq++, f.t_ms, dataset::Frame::from_action(*act)).dump() << '\n';
    if (a.speed > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(100.0 / a.speed));
  }
  const auto& m = ctl->metrics();
  err << clip.frames.size() << " frames, " << m.frames << " actions, " << m.replans << " replans, " << m.overruns
      << " overruns\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Parses and runs one command. Never throws.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Emotion-conditioned expressive motion: data, training, evaluation and serving", "exflow"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic demonstration corpus");
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--clips-per-emotion", sa.clips, "clips per emotion")->capture_default_str();
  synth->add_option("--frames", sa.frames, "frames per clip (10 Hz)")->capture_default_str();
  synth->add_option("--seed", sa.seed, "base seed")->capture_default_str();
  synth->add_option("--noise", sa.noise, "noise scale, 0 for pure archetypes")->capture_default_str();
  synth->add_option("--poke-weight", sa.poke_weight, "relative share of time curious clips spend poking")
      ->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a flow policy on a corpus");
  ta.app = train;
  train->add_option("--data", ta.data, "corpus directory")->required();
  train->add_option("--out", ta.out, "model file to write")->required();
  train->add_option("--preset", ta.preset, "paper | desk | smoke; explicit flags override it");
  train->add_option("--epochs", ta.epochs, "epochs")->capture_default_str();
  train->add_option("--batch", ta.batch, "batch size")->capture_default_str();
  train->add_option("--lr", ta.lr, "learning rate")->capture_default_str();
  train->add_option("--H", ta.history, "history window (1, 2, 4, 16)")->capture_default_str();
  train->add_option("--tp", ta.horizon, "prediction horizon (16, 32)")->capture_default_str();
  train->add_option("--seed", ta.seed, "seed")->capture_default_str();
  train->add_option("--widths", ta.widths, "U-Net channel widths per level");
  train->add_option("--precision", ta.precision, "float32 | float64")->check(CLI::IsMember({"float32", "float64"}));
  train->add_option("--loss-csv", ta.loss_csv, "loss curve CSV (default: <out>.loss.csv)");
  train->add_option("--log-every", ta.log_every, "print the loss every N epochs, 0 for never")->capture_default_str();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "closed-loop evaluation report for a model");
  ev->add_option("--model", ea.model, "model file")->required();
  ev->add_option("--data", ea.data, "corpus the emotion centroids come from")->required();
  ev->add_option("--report", ea.report, "JSON report to write")->required();
  ev->add_option("--rollouts-per-emotion", ea.rollouts, "rollouts per emotion")->capture_default_str();
  ev->add_option("--frames", ea.frames, "frames per rollout")->capture_default_str();
  ev->add_option("--steps", ea.steps, "Euler steps (default: the model's)");
  ev->add_option("--ta", ea.ta, "actions executed per plan (default Tp/2)");
  ev->add_option("--latency-calls", ea.latency_calls, "timed sampling calls")->capture_default_str();
  ev->add_option("--seed", ea.seed, "seed")->capture_default_str();
  ev->add_option("--plots", ea.plots, "directory for per-emotion trace CSVs and the loss curve");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "run the WebSocket server");
  serve->add_option("--port", sv.port, "TCP port")->capture_default_str()->check(CLI::Range(1, 65535));
  serve->add_option("--address", sv.address, "bind address")->capture_default_str();
  serve->add_option("--models-dir", sv.models_dir, "directory of model files")->capture_default_str();
  serve->add_option("--data-dir", sv.data_dir, "where logged clips go")->capture_default_str();
  serve->add_flag("--strict-marks", sv.strict_marks, "log only frames flagged by record_mark");
  serve->add_option("--steps", sv.steps, "Euler steps per plan")->capture_default_str()->check(CLI::PositiveNumber);
  serve->add_option("--ta", sv.ta, "actions executed per plan (default Tp/2)");
  serve->add_option("--seed", sv.seed, "sampling seed")->capture_default_str();
  serve->add_option("--duration", sv.duration_s, "stop after this many seconds (default: run until signalled)");

  ReplayArgs ra;
  auto* replay = app.add_subcommand("replay", "run a recorded clip through a local controller");
  replay->add_option("--clip", ra.clip, "clip file")->required();
  replay->add_option("--speed", ra.speed, "playback speed, 1 = real time, 0 = as fast as possible")
      ->capture_default_str();
  replay->add_option("--model", ra.model, "model file (default: replay the clip's own actions)");
  replay->add_option("--emotion", ra.emotion, "emotion to request (default: the clip's)");
  replay->add_option("--H", ra.history, "history window without a model")->capture_default_str();
  replay->add_option("--tp", ra.horizon, "chunk length without a model")->capture_default_str();
  replay->add_option("--ta", ra.ta, "actions executed per plan (default Tp/2)");
  replay->add_option("--steps", ra.steps, "Euler steps with a model")->capture_default_str();
  replay->add_option("--seed", ra.seed, "sampling seed")->capture_default_str();

  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "flat JSON file of flag values; command-line flags override it");
  app.allow_config_extras(CLI::config_extras_mode::error);
  for (auto* s : {synth, train, ev, serve, replay}) s->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("exflow");
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << "run 'exflow " << sub->get_name() << " --help' for usage\n";
    return kBadFlags;
  }

  try {
    if (synth->parsed()) return run_synth(sa, out);
    if (train->parsed()) return run_train(ta, out, err);
    if (ev->parsed()) return run_eval(ea, out);
    if (serve->parsed()) return run_serve(sv, out);
    if (replay->parsed()) return run_replay(ra, out, err);
  } catch (const FlagError& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const dataset::ClipError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kBadFlags;
}

}  // namespace exflow::cli
