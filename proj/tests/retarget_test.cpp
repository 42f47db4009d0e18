#include <exflow/retarget.hpp>

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace exflow;

constexpr double pi = std::numbers::pi;

TEST(MapFace, EyeScaleAtFullClosure) { EXPECT_NEAR(map_face(FaceBlend(1, 0, 0, 0)).s_eye, 0.1, 1e-12); }

TEST(MapFace, EarFromChinAndBrow) {
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 0, 1)).r_ear, -pi / 2, 1e-12);
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 1, 0)).r_ear, pi / 2, 1e-12);
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 1, 1)).r_ear, 0.0, 1e-12);
}

TEST(MapFace, EyeRotation) {
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 1, 1)).r_eye, pi / 3, 1e-12);
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 0.5, 0)).r_eye, pi / 12, 1e-12);
}

TEST(MapFace, GazeIsNegatedAndSaturates) {
  const RetargetConfig cfg;
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 0, 0, pi / 8, -pi / 8), cfg).p_eye_x, -0.5, 1e-12);
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 0, 0, pi / 8, -pi / 8), cfg).p_eye_y, 0.5, 1e-12);
  EXPECT_EQ(map_face(FaceBlend(0, 0, 0, 0, 10.0, -10.0), cfg).p_eye_x, -1.0);
  EXPECT_EQ(map_face(FaceBlend(0, 0, 0, 0, 10.0, -10.0), cfg).p_eye_y, 1.0);
}

TEST(MapFace, ThetaMaxIsConfigurable) {
  RetargetConfig cfg;
  cfg.theta_max = pi / 2;
  EXPECT_NEAR(map_face(FaceBlend(0, 0, 0, 0, pi / 4, 0), cfg).p_eye_x, -0.5, 1e-12);
}

TEST(MapFace, BlendInputsAreClamped) {
  const FaceBlend b(2.0, -1.0, 5.0, -3.0);
  EXPECT_EQ(b.c_eye, 1.0);
  EXPECT_EQ(b.d_lip, 0.0);
  EXPECT_EQ(b.h_brow, 1.0);
  EXPECT_EQ(b.h_chin, 0.0);
}

TEST(MapFace, EyelidsNeverCross) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.5, 1.5), th(-3, 3);
  for (int i = 0; i < 5000; ++i) {
    const auto d = map_face(FaceBlend(u(rng), u(rng), u(rng), u(rng), th(rng), th(rng)));
    EXPECT_TRUE(d.valid());
    EXPECT_LE(d.vertax_low_y, d.vertax_up_y);
  }
}

TEST(MapFace, NeutralFace) {
  const auto d = map_face(FaceBlend{});
  EXPECT_EQ(d.s_eye, 1.0);
  EXPECT_EQ(d.r_ear, 0.0);
  EXPECT_EQ(d.r_eye, 0.0);
  EXPECT_EQ(d.p_eye_x, 0.0);
}

TEST(MapHand, ScalesRelativePosition) {
  const Pose head = Pose::translation(0, 0, 1.6);
  const Pose hand = map_hand(Pose::translation(0.2, 0.1, 1.6), head, RetargetConfig{});
  EXPECT_NEAR(hand.position.x(), 0.3, 1e-12);
  EXPECT_NEAR(hand.position.y(), 0.15, 1e-12);
  EXPECT_NEAR(hand.position.z(), 0.0, 1e-12);
}

TEST(MapHand, RelativeToRotatedHead) {
  // head turned 90 degrees left: a controller to the operator's left is straight ahead
  const Pose head = Pose::from_parts(Vec3(0, 0, 1.6), Rotation::about_z(pi / 2));
  const Pose hand = map_hand(Pose::translation(0, 0.2, 1.6), head, RetargetConfig{});
  EXPECT_NEAR(hand.position.x(), 0.3, 1e-12);
  EXPECT_NEAR(hand.position.y(), 0.0, 1e-12);
}

TEST(MapHand, OrientationIsNotScaled) {
  const Pose head = Pose::identity();
  const Pose ctrl{Vec3(0.1, 0, 0), Vec3(0, 0, 0.5)};
  EXPECT_LT((map_hand(ctrl, head, RetargetConfig{}).orientation - Vec3(0, 0, 0.5)).norm(), 1e-12);
}

TEST(MapHead, KeepsOrientationOnly) {
  const Pose op{Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3)};
  const Pose r = map_head(op);
  EXPECT_EQ(r.position, Vec3::Zero());
  EXPECT_EQ(r.orientation, op.orientation);
}

TEST(RetargetConfig, RejectsNonPositive) {
  EXPECT_THROW((RetargetConfig{0.0, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((RetargetConfig{1.0, 0.0}.validate()), std::invalid_argument);
}

TEST(FaceWire, RoundTrip) {
  const std::array<double, 7> w{-0.5, 0.2, 0.3, 0.4, 0.9, 0.1, -0.1};
  EXPECT_EQ(FaceDofs::from_wire(w).to_wire(), w);
}
