#include <exflow/flow/artifact.hpp>
#include <exflow/flow/objective.hpp>
#include <exflow/flow/sampler.hpp>
#include <exflow/flow/train.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "test_util.hpp"

using namespace exflow;
using namespace exflow::flow;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.action_dim = 4;
  c.horizon = 8;
  c.obs_dim = 3;
  c.history = 2;
  c.num_labels = 3;
  c.widths = {8, 16};
  c.time_embed_dim = 8;
  c.time_hidden = 16;
  c.cond_hidden = 16;
  c.cond_embed_dim = 8;
  return c;
}

template <class S>
PackedBatch<S> random_batch(const ModelConfig& cfg, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  PackedBatch<S> b;
  b.x1.resize(cfg.action_dim, static_cast<Eigen::Index>(n) * cfg.horizon);
  b.cond = Mat<S>::Zero(cfg.cond_dim(), n);
  for (Eigen::Index i = 0; i < b.x1.size(); ++i) b.x1.data()[i] = static_cast<S>(u(rng));
  for (int j = 0; j < n; ++j) {
    b.cond(j % cfg.num_labels, j) = 1;
    for (int r = cfg.num_labels; r < cfg.cond_dim(); ++r) b.cond(r, j) = static_cast<S>(u(rng));
  }
  return b;
}

NormStats unit_stats(const ModelConfig& c) { return NormStats::unit(c.obs_dim, c.action_dim); }

}  // namespace

TEST(Interpolate, EndpointsAreExact) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  ActionChunk a(5, 3), b(5, 3);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a.data()[i] = g(rng);
    b.data()[i] = g(rng);
  }
  EXPECT_EQ(interpolate(a, b, 0.0), a);
  EXPECT_EQ(interpolate(a, b, 1.0), b);
  EXPECT_LT((interpolate(a, b, 0.25) - (0.75 * a + 0.25 * b)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(target_velocity(a, b), b - a);
}

TEST(Interpolate, RejectsBadArguments) {
  const ActionChunk a = ActionChunk::Zero(2, 2);
  EXPECT_THROW((void)interpolate(a, a, 1.5), std::invalid_argument);
  EXPECT_THROW((void)interpolate(a, a, std::nan("")), std::invalid_argument);
  EXPECT_THROW((void)interpolate(a, ActionChunk::Zero(3, 2), 0.5), std::invalid_argument);
}

TEST(Euler, ConstantFieldTransportsInOneStep) {
  const ActionChunk x0 = ActionChunk::Constant(2, 2, 0.3), u = ActionChunk::Constant(2, 2, -1.7);
  EXPECT_EQ(integrate_euler(x0, 1, [&](const ActionChunk&, double) { return u; }), x0 + u);
}

TEST(Euler, FirstOrderConvergenceOnLinearField) {
  // dx/dt = x from x(0) = 1 gives e at t = 1
  const auto solve = [](int n) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 1);
    return integrate_euler(x, n, [](const Eigen::MatrixXd& v, double) { return v; })(0, 0);
  };
  const double e10 = std::abs(solve(10) - std::exp(1.0)), e100 = std::abs(solve(100) - std::exp(1.0));
  EXPECT_NEAR(solve(10), std::pow(1.1, 10), 1e-12);
  EXPECT_GT(e10 / e100, 8.0);
}

TEST(Euler, RejectsZeroSteps) {
  EXPECT_THROW((void)integrate_euler(Eigen::MatrixXd(1, 1), 0, [](const Eigen::MatrixXd& v, double) { return v; }),
               std::invalid_argument);
}

TEST(Objective, ZeroHeadLossIsMeanSquaredTargetVelocity) {
  const auto cfg = small_config();
  const auto p = ModelParams<double>::initialized(cfg, 1, true);
  const auto batch = random_batch<double>(cfg, 4, 2);
  std::mt19937_64 rng(3);
  const auto noise = draw_noise<double>(cfg.action_dim, cfg.horizon, 4, rng);
  const double want = (batch.x1 - noise.x0).squaredNorm() / static_cast<double>(batch.x1.size());
  EXPECT_NEAR(loss_and_grad(p, batch, noise).loss, want, 1e-12);
}

TEST(Objective, GradientMatchesFiniteDifferences) {
  const auto cfg = small_config();
  for (std::uint64_t seed : {1, 2}) {
    const auto p = ModelParams<double>::initialized(cfg, seed, false);
    const auto batch = random_batch<double>(cfg, 3, seed + 10);
    std::mt19937_64 rng(seed);
    const auto noise = draw_noise<double>(cfg.action_dim, cfg.horizon, 3, rng);
    EXPECT_LT(grad_check(p, batch, noise, 300, seed), 1e-4);
  }
}

TEST(Objective, RelativeError) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(1e-14, 0.0), 1e-4);
}

TEST(Objective, NoiseShapeMismatchThrows) {
  const auto cfg = small_config();
  const auto p = ModelParams<double>::initialized(cfg, 1);
  const auto batch = random_batch<double>(cfg, 2, 1);
  std::mt19937_64 rng(1);
  const auto noise = draw_noise<double>(cfg.action_dim, cfg.horizon, 3, rng);
  EXPECT_THROW((void)loss_and_grad(p, batch, noise), std::invalid_argument);
}

TEST(Adam, FirstStepMovesEveryCoordinateByLr) {
  Adam<double> adam(3, {.lr = 0.01});
  Vec<double> p = Vec<double>::Zero(3), g(3);
  g << 2.0, -0.5, 1e-3;
  adam.step(p, g);
  EXPECT_NEAR(p[0], -0.01, 1e-9);
  EXPECT_NEAR(p[1], 0.01, 1e-9);
  EXPECT_NEAR(p[2], -0.01, 1e-7);
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto cfg = small_config();
  const auto batch = random_batch<double>(cfg, 20, 5);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 8;
  tc.horizon = cfg.horizon;
  tc.history = cfg.history;
  tc.learning_rate = 1e-3;
  tc.seed = 9;
  const TrainingSet<double> set{batch, unit_stats(cfg)};
  auto a = ModelParams<double>::initialized(cfg, 1);
  auto b = ModelParams<double>::initialized(cfg, 1);
  const auto ra = train(a, set, tc);
  const auto rb = train(b, set, tc);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  tc.seed = 10;
  auto c = ModelParams<double>::initialized(cfg, 1);
  (void)train(c, set, tc);
  EXPECT_NE(a.values(), c.values());
}

TEST(Train, LossDecreasesOnAFixedTarget) {
  const auto cfg = small_config();
  auto batch = random_batch<float>(cfg, 32, 6);
  batch.x1.setConstant(0.5f);
  TrainConfig tc;
  tc.epochs = 40;
  tc.batch_size = 16;
  tc.horizon = cfg.horizon;
  tc.history = cfg.history;
  tc.learning_rate = 3e-3;
  auto p = ModelParams<float>::initialized(cfg, 2);
  const auto r = train(p, TrainingSet<float>{batch, unit_stats(cfg)}, tc);
  ASSERT_FALSE(r.diverged);
  EXPECT_LT(r.epoch_loss.back(), 0.5 * r.epoch_loss.front());
}

TEST(Train, NonFiniteDataIsReportedAsDivergence) {
  const auto cfg = small_config();
  auto batch = random_batch<double>(cfg, 4, 7);
  batch.x1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 4;
  tc.horizon = cfg.horizon;
  tc.history = cfg.history;
  auto p = ModelParams<double>::initialized(cfg, 2);
  const auto r = train(p, TrainingSet<double>{batch, unit_stats(cfg)}, tc);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.epoch_loss.size(), 1u);
}

TEST(TrainConfig, PolicyGridIsEnforced) {
  TrainConfig tc;
  EXPECT_NO_THROW(tc.validate_policy());
  tc.horizon = 18;
  EXPECT_THROW(tc.validate_policy(), std::invalid_argument);
  tc.horizon = 32;
  tc.history = 3;
  EXPECT_THROW(tc.validate_policy(), std::invalid_argument);
  tc.history = 16;
  EXPECT_NO_THROW(tc.validate_policy());
  tc.epochs = 0;
  EXPECT_THROW(tc.validate(), std::invalid_argument);
}

TEST(Sampler, SameGeneratorStateSameChunk) {
  const auto cfg = small_config();
  const FlowModel<double> m(ModelParams<double>::initialized(cfg, 3, false), unit_stats(cfg));
  Condition c;
  c.label = 1;
  c.num_labels = cfg.num_labels;
  c.history = Eigen::MatrixXd::Zero(cfg.history, cfg.obs_dim);
  std::mt19937_64 r1(4), r2(4);
  const auto a = sample(m, c, 10, r1);
  const auto b = sample(m, c, 10, r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rows(), cfg.horizon);
  EXPECT_EQ(a.cols(), cfg.action_dim);
}

TEST(Sampler, StepRefinementConverges) {
  const auto cfg = small_config();
  const FlowModel<double> m(ModelParams<double>::initialized(cfg, 5, false), unit_stats(cfg));
  Sampler<double> s(m);
  Condition c;
  c.num_labels = cfg.num_labels;
  c.history = Eigen::MatrixXd::Constant(cfg.history, cfg.obs_dim, 0.1);
  std::mt19937_64 rng(6);
  const auto x0 = draw_source<double>(cfg, rng);
  const auto cond = m.encode_condition(c);
  const auto f = s.flow(x0, cond, 400);
  double prev = 1e300;
  for (int n : {5, 10, 50, 100}) {
    const double e = (s.flow(x0, cond, n) - f).norm();
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(FlowModel, ChunkEncodingRoundTrips) {
  const auto cfg = small_config();
  NormStats st = unit_stats(cfg);
  st.act.min << -2, 0, 5, 1;
  st.act.max << 2, 1, 5, 3;  // dimension 2 is constant
  const FlowModel<double> m(ModelParams<double>::initialized(cfg, 1), st);
  ActionChunk a(cfg.horizon, cfg.action_dim);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int r = 0; r < a.rows(); ++r) a.row(r) << 4 * u(rng) - 2, u(rng), 5, 1 + 2 * u(rng);
  const auto enc = m.encode_chunk(a);
  EXPECT_LE(enc.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  EXPECT_EQ(enc.row(2).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT((m.decode_chunk(enc) - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FlowModel, ConditionShapeIsChecked) {
  const auto cfg = small_config();
  const FlowModel<double> m(ModelParams<double>::initialized(cfg, 1), unit_stats(cfg));
  Condition c;
  c.num_labels = cfg.num_labels;
  c.history = Eigen::MatrixXd::Zero(cfg.history + 1, cfg.obs_dim);
  EXPECT_THROW((void)m.encode_condition(c), std::invalid_argument);
  c.history = Eigen::MatrixXd::Zero(cfg.history, cfg.obs_dim);
  c.label = cfg.num_labels;
  EXPECT_THROW((void)m.encode_condition(c), std::out_of_range);
}

TEST(Artifact, RoundTripIsExact) {
  const auto cfg = small_config();
  Artifact a;
  a.params = ModelParams<double>::initialized(cfg, 8, false);
  a.stats = unit_stats(cfg);
  a.stats.act.min[0] = -3.25;
  a.precision = "float32";
  a.meta = {{"epochs", 7}};
  std::stringstream ss;
  write_artifact(ss, a);
  const Artifact b = read_artifact(ss);
  EXPECT_EQ(b.config(), cfg);
  EXPECT_EQ(b.params.values(), a.params.values());
  EXPECT_EQ(b.stats, a.stats);
  EXPECT_EQ(b.precision, "float32");
  EXPECT_EQ(b.meta.at("epochs"), 7);
}

TEST(Artifact, CorruptionIsDetected) {
  const auto cfg = small_config();
  Artifact a;
  a.params = ModelParams<double>::initialized(cfg, 8);
  a.stats = unit_stats(cfg);
  std::stringstream ss;
  write_artifact(ss, a);
  const std::string bytes = ss.str();

  std::stringstream bad_magic("NOTAMODEL" + bytes.substr(9));
  EXPECT_THROW((void)read_artifact(bad_magic), std::runtime_error);
  for (std::size_t cut : {std::size_t{4}, std::size_t{14}, std::size_t{40}, bytes.size() - 8}) {
    std::stringstream trunc(bytes.substr(0, cut));
    EXPECT_ANY_THROW((void)read_artifact(trunc)) << "cut at " << cut;
  }
  std::string nan_bytes = bytes;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nan_bytes.data() + nan_bytes.size() - sizeof(double), &nan, sizeof nan);
  std::stringstream with_nan(nan_bytes);
  EXPECT_THROW((void)read_artifact(with_nan), std::runtime_error);
}

TEST(Artifact, FileRoundTrip) {
  exflow::testing::TempDir dir("artifact");
  const auto cfg = small_config();
  Artifact a;
  a.params = ModelParams<double>::initialized(cfg, 2);
  a.stats = unit_stats(cfg);
  save_artifact(dir / "sub/model.bin", a);
  EXPECT_EQ(load_artifact(dir / "sub/model.bin").params.values(), a.params.values());
  EXPECT_THROW((void)load_artifact(dir / "missing"), std::runtime_error);
}
