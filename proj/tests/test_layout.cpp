#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scenetex/fixtures.hpp"
#include "scenetex/layout.hpp"

using namespace scenetex;

TEST(OptimConfig, DefaultsAreThePublishedSchedule) {
  const OptimConfig c;
  EXPECT_EQ(c.lambda3d, 1.0);
  EXPECT_EQ(c.lambda2d, 5e-2);
  EXPECT_EQ(c.epochs, 20);
  EXPECT_EQ(c.iters_per_epoch, 2000);
  EXPECT_EQ(c.warmup_3d_iters, 1200);
  EXPECT_EQ(c.learning_rate, 0.01);
  EXPECT_EQ(c.adam_beta1, 0.9);
  EXPECT_EQ(c.adam_beta2, 0.999);
  EXPECT_EQ(c.adam_epsilon, 1e-8);
  EXPECT_NO_THROW(c.validate());
}

TEST(OptimConfig, ScaledKeepsWarmupShare) {
  const auto s = OptimConfig{}.scaled(5, 400);
  EXPECT_EQ(s.epochs, 5);
  EXPECT_EQ(s.iters_per_epoch, 400);
  EXPECT_EQ(s.warmup_3d_iters, 240);
  EXPECT_EQ(OptimConfig{}.scaled(1, 1).warmup_3d_iters, 1);
}

TEST(OptimConfig, ValidateRejectsBadValues) {
  OptimConfig c;
  c.warmup_3d_iters = 3000;
  EXPECT_THROW(c.validate(), Error);
  c = OptimConfig{};
  c.adam_beta1 = 1.0;
  EXPECT_THROW(c.validate(), Error);
  c = OptimConfig{};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = OptimConfig{};
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam<7> adam({0.01, 0.9, 0.999, 1e-8});
  Eigen::Matrix<double, 7, 1> x = Eigen::Matrix<double, 7, 1>::Zero();
  Eigen::Matrix<double, 7, 1> g;
  g << 1, -2, 3e-3, -4e3, 5, 6, -7;
  adam.step(x, g);
  for (int i = 0; i < 7; ++i) EXPECT_NEAR(x(i), -0.01 * g(i) / (std::abs(g(i)) + 1e-8), 1e-15);
  EXPECT_EQ(adam.steps(), 1);
  adam.reset();
  EXPECT_EQ(adam.steps(), 0);
}

TEST(InitPose, AlignsCentroidsAndDiagonals) {
  std::mt19937_64 rng(41);
  PointCloud src, tgt;
  src.points = oracle::random_points(rng, 300);
  PoseParams gt;
  gt.translation = Vec3(1, -2, 0.5);
  gt.log_scale = std::log(2.0);
  tgt = apply_pose(gt, src);
  const auto p = init_pose(src, tgt);
  EXPECT_NEAR(p.scale(), 2.0, 1e-12);
  EXPECT_EQ(p.rotation, Vec3::Zero());
  const auto moved = apply_pose(p, src);
  EXPECT_LT((moved.centroid() - tgt.centroid()).norm(), 1e-12);

  PointCloud flat;
  flat.points = {Vec3(1, 1, 1), Vec3(1, 1, 1)};
  try {
    init_pose(flat, tgt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateCloud);
  }
}

TEST(OptimizePose, RecoversSimilarityFromFullCloud) {
  const auto mesh = fixtures::blob(3);
  const auto src = sample_surface(mesh, 2048, 5);
  PoseParams gt;
  gt.translation = Vec3(0.1, -0.05, 0.2);
  gt.rotation = Vec3(0.1, 0.3, -0.15);
  gt.log_scale = std::log(1.1);
  const auto tgt = apply_pose(gt, src);
  const auto cam = look_at(Vec3(0.3, -0.6, -3), Vec3::Zero(), Vec3::UnitY(), 500, 500, 320, 240, 640, 480);
  auto cfg = OptimConfig{}.scaled(5, 400);
  cfg.record_iterations = true;
  const auto r = optimize_pose(src, tgt, cam, cfg);
  EXPECT_LT((r.pose.translation - gt.translation).norm(), 1e-2);
  const Mat3 dr = r.pose.rotation_matrix().transpose() * gt.rotation_matrix();
  EXPECT_LT(Eigen::AngleAxisd(dr).angle() * 180.0 / M_PI, 1.0);
  EXPECT_NEAR(r.pose.scale(), 1.1, 0.01 * 1.1);
  ASSERT_EQ(r.trace.epochs.size(), 5u);
  EXPECT_EQ(r.trace.iteration_losses.size(), 2000u);
  EXPECT_LT(r.trace.epochs[r.trace.best_epoch].loss, r.trace.initial_loss);
  for (const auto& e : r.trace.epochs) EXPECT_GE(e.loss, r.trace.epochs[r.trace.best_epoch].loss);
}

TEST(OptimizePose, DeterministicForFixedSeed) {
  const auto mesh = fixtures::blob(2);
  const auto src = sample_surface(mesh, 600, 1);
  PoseParams gt;
  gt.translation = Vec3(0.05, 0, 0.1);
  const auto tgt = apply_pose(gt, sample_surface(mesh, 600, 2));
  const auto cam = look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 300, 300, 160, 120, 320, 240);
  auto cfg = OptimConfig{}.scaled(2, 50);
  cfg.max_points = 400;
  const auto a = optimize_pose(src, tgt, cam, cfg);
  const auto b = optimize_pose(src, tgt, cam, cfg);
  EXPECT_EQ(a.pose.to_vector(), b.pose.to_vector());
}

TEST(Fscore, IdenticalAndDisjointClouds) {
  std::mt19937_64 rng(42);
  PointCloud a;
  a.points = oracle::random_points(rng, 200);
  EXPECT_EQ(fscore(a, a, 0.02), 100.0);
  PointCloud far = a;
  for (auto& p : far.points) p += Vec3(10, 0, 0);
  EXPECT_EQ(fscore(a, far, 0.02), 0.0);
  EXPECT_THROW(fscore(a, a, 0.0), Error);
}

TEST(Fscore, MatchesBruteForceCount) {
  std::mt19937_64 rng(43);
  PointCloud a, b;
  a.points = oracle::random_points(rng, 150);
  b.points = oracle::random_points(rng, 170);
  const double tau = 0.15;
  auto share = [&](const std::vector<Vec3>& q, const std::vector<Vec3>& ref) {
    int hits = 0;
    for (const auto& p : q) hits += oracle::brute_nearest(ref, p).second <= tau * tau;
    return static_cast<double>(hits) / q.size();
  };
  const double p = share(a.points, b.points), r = share(b.points, a.points);
  EXPECT_NEAR(fscore(a, b, tau), 200.0 * p * r / (p + r), 1e-12);
}

TEST(AssembleScene, KeepsNodesSeparate) {
  const auto cube = fixtures::cube();
  PoseParams p;
  p.translation = Vec3(1, 0, 0);
  const auto scene = assemble_scene({{cube, p}, {cube, PoseParams::identity()}}, std::make_pair(cube, PoseParams{}));
  ASSERT_EQ(scene.nodes.size(), 3u);
  EXPECT_TRUE(scene.nodes[2].background);
  EXPECT_EQ(scene.nodes[0].mesh.vertices.size(), cube.vertices.size());
  EXPECT_LT((scene.nodes[0].world_mesh().vertices[0] - cube.vertices[0] - Vec3(1, 0, 0)).norm(), 1e-15);
  PoseParams bad;
  bad.log_scale = std::numeric_limits<double>::infinity();
  EXPECT_THROW(assemble_scene({{cube, bad}}), Error);
}
