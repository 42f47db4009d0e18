#include <exflow/cli/app.hpp>
#include <exflow/server/client.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace exflow;
using exflow::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string s(const std::filesystem::path& p) { return p.string(); }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kBadFlags);
  EXPECT_EQ(run({"bake"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"synth"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"synth", "--out", "x", "--frames", "ten"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"serve", "--port", "70000"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"train", "--data", "d", "--out", "m", "--preset", "huge"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"train", "--data", "d", "--out", "m", "--H", "3"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"train", "--data", "d", "--out", "m", "--tp", "20"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"train", "--data", "d", "--out", "m", "--precision", "half"}).code, cli::kBadFlags);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST(Cli, SynthWritesTheCorpus) {
  TempDir dir("cli_synth");
  const auto r = run({"synth", "--out", s(dir / "c"), "--clips-per-emotion", "2", "--frames", "40", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto corpus = dataset::load_corpus(dir / "c");
  ASSERT_EQ(corpus.size(), 14u);
  EXPECT_EQ(corpus[0].size(), 40);
  EXPECT_EQ(run({"synth", "--out", s(dir / "c"), "--clips-per-emotion", "0"}).code, cli::kBadFlags);
}

TEST(Cli, ConfigFileWithCommandLineOverride) {
  TempDir dir("cli_cfg");
  std::ofstream(dir / "cfg.json") << R"({"out": ")" << s(dir / "c") << R"(", "clips-per-emotion": 1, "frames": 50})";
  const auto r = run({"synth", "--config", s(dir / "cfg.json"), "--frames", "30"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto corpus = dataset::load_corpus(dir / "c");
  ASSERT_EQ(corpus.size(), 7u);
  EXPECT_EQ(corpus[0].size(), 30);

  std::ofstream(dir / "bad.json") << R"({"colour": 1})";
  EXPECT_EQ(run({"synth", "--out", "x", "--config", s(dir / "bad.json")}).code, cli::kBadFlags);
  std::ofstream(dir / "broken.json") << "{";
  EXPECT_EQ(run({"synth", "--out", "x", "--config", s(dir / "broken.json")}).code, cli::kBadFlags);
  EXPECT_EQ(run({"synth", "--config", s(dir / "missing.json")}).code, cli::kBadFlags);
}

TEST(Cli, DataErrorsExitThree) {
  TempDir dir("cli_data");
  EXPECT_EQ(run({"train", "--data", s(dir / "none"), "--out", s(dir / "m")}).code, cli::kDataError);
  std::filesystem::create_directories(dir / "empty");
  EXPECT_EQ(run({"train", "--data", s(dir / "empty"), "--out", s(dir / "m")}).code, cli::kDataError);
  ASSERT_EQ(run({"synth", "--out", s(dir / "short"), "--clips-per-emotion", "1", "--frames", "12"}).code, 0);
  const auto r = run({"train", "--data", s(dir / "short"), "--out", s(dir / "m"), "--preset", "smoke"});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("H + Tp = 18"), std::string::npos) << r.err;
  std::ofstream(dir / "junk.model") << "junk";
  EXPECT_EQ(run({"eval", "--model", s(dir / "junk.model"), "--data", s(dir / "short"), "--report", s(dir / "r.json")}).code,
            cli::kDataError);
  EXPECT_EQ(run({"replay", "--clip", s(dir / "nothing.jsonl")}).code, cli::kDataError);
}

TEST(Cli, TrainEvalReplayPipeline) {
  TempDir dir("cli_pipe");
  ASSERT_EQ(run({"synth", "--out", s(dir / "c"), "--clips-per-emotion", "1", "--frames", "40"}).code, 0);
  const auto t = run({"train", "--data", s(dir / "c"), "--out", s(dir / "m.bin"), "--preset", "smoke", "--epochs", "2",
                      "--widths", "8", "16", "--log-every", "1"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.err.find("epoch 1 loss"), std::string::npos);
  const auto art = flow::load_artifact(dir / "m.bin");
  EXPECT_EQ(art.config().widths, (std::vector<int>{8, 16}));
  EXPECT_EQ(art.precision, "float32");
  EXPECT_EQ(art.meta["epochs"], 2);
  std::ifstream csv(dir / "m.bin.loss.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 3);

  const auto e = run({"eval", "--model", s(dir / "m.bin"), "--data", s(dir / "c"), "--report", s(dir / "r.json"),
                      "--rollouts-per-emotion", "1", "--frames", "30", "--latency-calls", "3", "--plots", s(dir / "p")});
  ASSERT_EQ(e.code, 0) << e.err;
  std::ifstream rf(dir / "r.json");
  const auto rep = nlohmann::json::parse(rf);
  for (const char* k : {"separability", "corpus_separability", "confusion", "per_emotion", "latency", "closed_loop"})
    EXPECT_TRUE(rep.contains(k)) << k;
  EXPECT_EQ(rep["latency"]["calls"], 3);
  EXPECT_EQ(rep["closed_loop"]["actions"], 7 * 29);
  EXPECT_TRUE(std::filesystem::exists(dir / "p" / "traces_calm.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "p" / "loss_curve.csv"));

  const auto clip = dataset::load_corpus(dir / "c").front();
  const auto path = dir / "c" / clip.file_name();
  const auto teacher = run({"replay", "--clip", s(path)});
  ASSERT_EQ(teacher.code, 0) << teacher.err;
  std::istringstream lines_in(teacher.out);
  int acts = 0;
  while (std::getline(lines_in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["type"], "act");
    ++acts;
  }
  EXPECT_EQ(acts, 39);
  const auto modelled = run({"replay", "--clip", s(path), "--model", s(dir / "m.bin"), "--emotion", "fear"});
  EXPECT_EQ(modelled.code, 0) << modelled.err;
  EXPECT_EQ(run({"replay", "--clip", s(path), "--emotion", "glee"}).code, cli::kBadFlags);
}

TEST(Cli, TeacherReplayReproducesTheClip) {
  TempDir dir("cli_teacher");
  const auto clip = dataset::synth_demo(Emotion::kSad, 4.0, 2);
  const auto path = dataset::save_clip(dir.path(), clip);
  const auto r = run({"replay", "--clip", s(path), "--H", "1", "--tp", "16", "--ta", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  // the action emitted after observing frame i is frame i + 1's action
  for (int i = 0; std::getline(in, line); ++i) {
    if (i + 1 >= clip.size()) break;
    const auto a = nlohmann::json::parse(line);
    EXPECT_EQ((a["face"].get<std::array<double, 7>>()), clip.frames[i + 1].face.to_wire()) << i;
    EXPECT_EQ((a["hand_r"].get<std::array<double, 6>>()), clip.frames[i + 1].hand_right.to_vec6()) << i;
  }
}

TEST(Cli, DivergenceExitsFour) {
  TempDir dir("cli_div");
  ASSERT_EQ(run({"synth", "--out", s(dir / "c"), "--clips-per-emotion", "1", "--frames", "30"}).code, 0);
  const auto r = run({"train", "--data", s(dir / "c"), "--out", s(dir / "m.bin"), "--preset", "smoke", "--widths", "8",
                      "--lr", "1e30", "--log-every", "0"});
  EXPECT_EQ(r.code, cli::kDiverged) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir / "m.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "m.bin.loss.csv"));
}

TEST(Cli, ServeRunsForAFixedDurationAndRejectsBusyPorts) {
  TempDir dir("cli_serve");
  const auto r = run({"serve", "--port", "18765", "--models-dir", s(dir / "m"), "--data-dir", s(dir / "d"),
                      "--duration", "0.3"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("listening on ws://127.0.0.1:18765/"), std::string::npos);

  server::WsServer busy(server::ServerConfig{});
  const auto port = busy.start();
  EXPECT_EQ(run({"serve", "--port", std::to_string(port), "--duration", "0.1"}).code, cli::kBadFlags);
}
