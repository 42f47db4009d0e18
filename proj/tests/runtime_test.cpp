#include <exflow/eval.hpp>
#include <exflow/runtime/controller.hpp>

#include <gtest/gtest.h>

#include <thread>

using namespace exflow;
using namespace exflow::runtime;

namespace {

ControllerConfig config(int h = 2, int tp = 16, int ta = 8) {
  ControllerConfig c;
  c.history = h;
  c.horizon = tp;
  c.execute = ta;
  return c;
}

/// Chunk whose row k holds 100 * call + k in every entry.
Planner counting_planner(int& calls, int tp = 16) {
  return [&calls, tp](const flow::Condition&) {
    ++calls;
    flow::ActionChunk c(tp, 25);
    for (int k = 0; k < tp; ++k) c.row(k).setConstant(100.0 * calls + k);
    return c;
  };
}

const Eigen::VectorXd kObs = Eigen::VectorXd::Zero(27);

}  // namespace

TEST(Controller, WarmUpThenOneActionPerObservation) {
  int calls = 0;
  Controller ctl(config(4), counting_planner(calls));
  for (int i = 0; i < 3; ++i) EXPECT_FALSE(ctl.push_observation(kObs).has_value());
  EXPECT_FALSE(ctl.warmed_up());
  EXPECT_EQ(calls, 0);
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(ctl.push_observation(kObs).has_value());
  EXPECT_EQ(ctl.metrics().frames, 20u);
}

TEST(Controller, ExecutesTaActionsOfEachChunkInOrder) {
  int calls = 0;
  Controller ctl(config(1), counting_planner(calls));
  std::vector<double> got;
  for (int i = 0; i < 24; ++i) got.push_back((*ctl.push_observation(kObs))[0]);
  for (int i = 0; i < 24; ++i) EXPECT_EQ(got[i], 100.0 * (i / 8 + 1) + i % 8) << i;
  EXPECT_EQ(ctl.metrics().replans, 3u);
}

class ReplanCount : public ::testing::TestWithParam<std::tuple<int, int>> {};

TEST_P(ReplanCount, CeilOfNOverTa) {
  const auto [n, ta] = GetParam();
  int calls = 0;
  Controller ctl(config(2, 16, ta), counting_planner(calls));
  (void)ctl.push_observation(kObs);
  int acts = 0;
  for (int i = 0; i < n; ++i) acts += ctl.push_observation(kObs).has_value();
  EXPECT_EQ(acts, n);
  EXPECT_EQ(ctl.metrics().replans, static_cast<std::uint64_t>((n + ta - 1) / ta));
}

INSTANTIATE_TEST_SUITE_P(Grid, ReplanCount,
                         ::testing::Combine(::testing::Values(1, 5, 8, 9, 31, 32, 33, 250),
                                            ::testing::Values(1, 4, 8, 16)));

TEST(Controller, DefaultTaIsHalfTp) {
  EXPECT_EQ(config(2, 16, 0).ta(), 8);
  EXPECT_EQ(config(2, 32, 0).ta(), 16);
  EXPECT_EQ(config(2, 1, 0).ta(), 1);
  EXPECT_THROW(Controller(config(2, 16, 17), constant_planner(flow::ActionChunk::Zero(16, 25))), std::invalid_argument);
}

TEST(Controller, EmotionSwitchReplansOnNextObservation) {
  std::vector<int> labels;
  Controller ctl(config(),
                 [&](const flow::Condition& c) {
                   labels.push_back(c.label);
                   return flow::ActionChunk(flow::ActionChunk::Constant(16, 25, c.label));
                 },
                 Emotion::kHappy);
  for (int i = 0; i < 4; ++i) (void)ctl.push_observation(kObs);
  ctl.set_emotion(Emotion::kFear);
  EXPECT_EQ(ctl.pending(), 0);
  EXPECT_EQ((*ctl.push_observation(kObs))[0], index_of(Emotion::kFear));
  EXPECT_EQ(labels, (std::vector<int>{index_of(Emotion::kHappy), index_of(Emotion::kFear)}));
}

TEST(Controller, SameEmotionKeepsQueue) {
  int calls = 0;
  Controller ctl(config(), counting_planner(calls), Emotion::kSad);
  for (int i = 0; i < 3; ++i) (void)ctl.push_observation(kObs);
  const int before = ctl.pending();
  ctl.set_emotion(Emotion::kSad);
  EXPECT_EQ(ctl.pending(), before);
}

TEST(Controller, SwitchWithoutFlushWaitsForTheChunkBoundary) {
  auto cfg = config();
  cfg.flush_on_switch = false;
  std::vector<int> labels;
  Controller ctl(cfg, [&](const flow::Condition& c) {
    labels.push_back(c.label);
    return flow::ActionChunk(flow::ActionChunk::Zero(16, 25));
  });
  for (int i = 0; i < 3; ++i) (void)ctl.push_observation(kObs);
  ctl.set_emotion(Emotion::kAngry);
  for (int i = 0; i < 6; ++i) (void)ctl.push_observation(kObs);
  EXPECT_EQ(labels.size(), 1u);
  (void)ctl.push_observation(kObs);
  EXPECT_EQ(labels.back(), index_of(Emotion::kAngry));
}

TEST(Controller, ConditionHoldsTheLastHObservationsOldestFirst) {
  flow::Condition seen;
  Controller ctl(config(3), [&](const flow::Condition& c) {
    seen = c;
    return flow::ActionChunk(flow::ActionChunk::Zero(16, 25));
  });
  for (int i = 0; i < 5; ++i) (void)ctl.push_observation(Eigen::VectorXd::Constant(27, i));
  ASSERT_EQ(seen.history.rows(), 3);
  EXPECT_EQ(seen.history(0, 0), 0);
  EXPECT_EQ(ctl.condition().history(0, 0), 2);
  EXPECT_EQ(ctl.condition().history(2, 0), 4);
}

TEST(Controller, OverrunRepeatsLastActionAndCounts) {
  auto cfg = config(1, 16, 2);
  cfg.tick_budget_ms = 5.0;
  int calls = 0;
  Controller ctl(cfg, [&](const flow::Condition&) {
    ++calls;
    if (calls == 2) std::this_thread::sleep_for(std::chrono::milliseconds(20));
    return flow::ActionChunk(flow::ActionChunk::Constant(16, 25, calls));
  });
  EXPECT_EQ((*ctl.push_observation(kObs))[0], 1);
  EXPECT_EQ((*ctl.push_observation(kObs))[0], 1);
  EXPECT_EQ((*ctl.push_observation(kObs))[0], 1);  // late plan: previous action held
  EXPECT_EQ(ctl.metrics().overruns, 1u);
  EXPECT_EQ((*ctl.push_observation(kObs))[0], 2);
  EXPECT_GE(ctl.metrics().max_sample_ms, 20.0);
}

TEST(Controller, InputValidation) {
  int calls = 0;
  Controller ctl(config(), counting_planner(calls));
  EXPECT_THROW((void)ctl.push_observation(Eigen::VectorXd::Zero(5)), std::invalid_argument);
  Controller bad(config(1), constant_planner(flow::ActionChunk::Zero(16, 3)));
  EXPECT_THROW((void)bad.push_observation(kObs), std::runtime_error);
  EXPECT_THROW(Controller(config(), Planner{}), std::invalid_argument);
}

TEST(ModelPlanner, SeededAndShaped) {
  nn::ModelConfig mc;
  mc.widths = {8, 16};
  const auto stats = NormStats::unit(mc.obs_dim, mc.action_dim);
  auto model = std::make_shared<const flow::FlowModel<float>>(
      flow::ModelParams<float>::initialized(mc, 1, false), stats);
  const auto cc = controller_config_for(mc);
  EXPECT_EQ(cc.ta(), 8);
  Controller a(cc, model_planner(model, 4, 7)), b(cc, model_planner(model, 4, 7));
  for (int i = 0; i < 12; ++i) {
    const auto x = a.push_observation(kObs), y = b.push_observation(kObs);
    ASSERT_EQ(x.has_value(), y.has_value());
    if (x) EXPECT_EQ(*x, *y);
  }
}

TEST(Latency, NearestRankPercentiles) {
  std::vector<double> ms;
  for (int i = 1; i <= 200; ++i) ms.push_back(i);
  const auto s = eval::summarize_latency(ms);
  EXPECT_EQ(s.calls, 200);
  EXPECT_EQ(s.p50_ms, 100);
  EXPECT_EQ(s.p95_ms, 190);
  EXPECT_EQ(s.max_ms, 200);
  EXPECT_DOUBLE_EQ(s.mean_ms, 100.5);
  EXPECT_EQ(eval::summarize_latency({}).calls, 0);
}

TEST(Rollout, ExecutedActionBecomesTheNextState) {
  std::vector<Eigen::MatrixXd> histories;
  ControllerConfig cc = config(1, 4, 1);
  flow::ActionChunk chunk = flow::ActionChunk::Zero(4, 25);
  chunk(0, 6) = 0.42;  // left hand x
  Controller ctl(cc, [&](const flow::Condition& c) {
    histories.push_back(c.history);
    return chunk;
  });
  const auto path = dataset::mouse_trajectory(1, 1.0);
  const auto clip = eval::rollout(ctl, Emotion::kBored, path);
  ASSERT_EQ(clip.size(), 10);
  EXPECT_EQ(clip.emotion, Emotion::kBored);
  EXPECT_EQ(histories[0](0, 6), dataset::kRestLeft.x());
  EXPECT_EQ(histories[1](0, 6), 0.42);
  EXPECT_EQ(clip.frames[3].target, path[3].p);
}

TEST(Classifier, RecognizesItsOwnCentroids) {
  const auto corpus = dataset::synth_corpus(3, 100, 2);
  const auto st = dataset::compute_norm_stats(corpus);
  const eval::CentroidClassifier clf(corpus, st.act);
  const auto conf = eval::score(clf, corpus);
  EXPECT_EQ(conf.total(), 21);
  EXPECT_GE(conf.accuracy(), 0.95);
  dataset::Corpus missing(corpus.begin(), corpus.begin() + 3);
  EXPECT_THROW(eval::CentroidClassifier(missing, st.act), std::invalid_argument);
}

TEST(Classifier, LeaveOneOutCountsSingletonsAsMisses) {
  auto corpus = dataset::synth_corpus(1, 50, 2);
  const auto st = dataset::compute_norm_stats(corpus);
  EXPECT_EQ(eval::leave_one_out(corpus, st.act).accuracy(), 0.0);
}
