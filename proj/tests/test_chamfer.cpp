#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scenetex/chamfer.hpp"

using namespace scenetex;

namespace {

PinholeCamera front_camera() {
  return look_at(Vec3(0.2, -0.3, -3.0), Vec3::Zero(), Vec3::UnitY(), 400, 400, 160, 120, 320, 240);
}

PoseParams random_pose(std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> n(0.0, spread);
  PoseParams p;
  p.translation = Vec3(n(rng), n(rng), n(rng));
  p.rotation = Vec3(n(rng), n(rng), n(rng));
  p.log_scale = 0.5 * n(rng);
  return p;
}

}  // namespace

TEST(Chamfer, MatchesBruteForce3d) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 400);
  for (int i = 0; i < 40; ++i) {
    const auto a = oracle::random_points(rng, size(rng));
    const auto b = oracle::random_points(rng, size(rng), -0.5, 1.5);
    const double want = oracle::brute_chamfer(a, b);
    EXPECT_NEAR(chamfer3d(a, b), want, 1e-10 * want);
    EXPECT_DOUBLE_EQ(chamfer3d(a, b), chamfer3d(b, a));
  }
}

TEST(Chamfer, MatchesBruteForce2d) {
  std::mt19937_64 rng(32);
  const auto cam = front_camera();
  for (int i = 0; i < 20; ++i) {
    const auto a = oracle::random_points(rng, 300);
    const auto b = oracle::random_points(rng, 250);
    const double want = oracle::brute_chamfer(oracle::brute_project(cam, a), oracle::brute_project(cam, b));
    EXPECT_NEAR(chamfer2d(cam, a, b), want, 1e-10 * want);
  }
}

TEST(Chamfer, ZeroForIdenticalClouds) {
  std::mt19937_64 rng(33);
  const auto a = oracle::random_points(rng, 500);
  EXPECT_EQ(chamfer3d(a, a), 0.0);
  EXPECT_EQ(chamfer2d(front_camera(), a, a), 0.0);
}

TEST(Chamfer, BehindCameraCulledAndEmptyRejected) {
  const PinholeCamera cam(100, 100, 50, 50, 100, 100);
  const std::vector<Vec3> behind = {Vec3(0, 0, -1), Vec3(1, 0, -2)};
  const std::vector<Vec3> front = {Vec3(0, 0, 1), Vec3(0.1, 0, 2)};
  try {
    chamfer2d(cam, behind, front);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllPointsCulled);
  }
  // partially culled: only the front point of `mixed` takes part
  const std::vector<Vec3> mixed = {Vec3(0, 0, 1), Vec3(0, 0, -1)};
  EXPECT_EQ(chamfer2d(cam, mixed, std::vector<Vec3>{Vec3(0, 0, 3)}), 0.0);
  EXPECT_THROW(chamfer3d(std::vector<Vec3>{}, front), Error);
}

TEST(Chamfer, ObjectiveLossMatchesDirectEvaluation) {
  std::mt19937_64 rng(34);
  const auto cam = front_camera();
  const auto src = oracle::random_points(rng, 300, -0.5, 0.5);
  const auto tgt = oracle::random_points(rng, 280, -0.6, 0.6);
  const ChamferObjective obj(src, tgt, cam);
  for (int i = 0; i < 10; ++i) {
    const auto pose = random_pose(rng, 0.1);
    std::vector<Vec3> posed;
    for (const auto& p : src) posed.push_back(pose.apply(p));
    const double c3 = oracle::brute_chamfer(posed, tgt);
    const double c2 = oracle::brute_chamfer(oracle::brute_project(cam, posed), oracle::brute_project(cam, tgt));
    const auto r = obj.evaluate(pose, 1.0, 1e-3, true, false);
    EXPECT_NEAR(r.chamfer3d, c3, 1e-10 * c3);
    EXPECT_NEAR(r.chamfer2d, c2, 1e-10 * c2);
    EXPECT_NEAR(r.loss, c3 + 1e-3 * c2, 1e-10 * r.loss);
    const auto only3d = obj.evaluate(pose, 2.0, 1e-3, false, false);
    EXPECT_EQ(only3d.chamfer2d, 0.0);
    EXPECT_NEAR(only3d.loss, 2.0 * c3, 1e-10 * c3);
  }
}

TEST(Chamfer, RotationJacobianMatchesFiniteDifference) {
  std::mt19937_64 rng(35);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    Vec3 r(n(rng), n(rng), n(rng));
    if (i % 5 == 0) r *= 1e-5;
    const Vec3 q(n(rng), n(rng), n(rng));
    const Mat3 j = rotation_jacobian(r, q);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
      Vec3 rp = r, rm = r;
      rp(k) += h;
      rm(k) -= h;
      const Vec3 fd = (oracle::eigen_rotation(rp) * q - oracle::eigen_rotation(rm) * q) / (2 * h);
      EXPECT_LT((j.col(k) - fd).norm(), 1e-7 * std::max(1.0, fd.norm()));
    }
  }
}

TEST(Chamfer, GradientMatchesCentralDifference) {
  // Instances whose stencil crosses a nearest-neighbour switch are redrawn:
  // the loss is only piecewise smooth.
  std::mt19937_64 rng(36);
  const auto cam = front_camera();
  int checked = 0, redrawn = 0;
  while (checked < 20) {
    const auto src = oracle::random_points(rng, 120, -0.5, 0.5);
    const auto tgt = oracle::random_points(rng, 100, -0.5, 0.5);
    const auto pose = random_pose(rng, 0.1);
    const bool use2d = checked % 2 == 0;
    if (!oracle::smooth_on_stencil(pose, src, tgt, cam, use2d, 1e-5)) {
      ++redrawn;
      continue;
    }
    const ChamferObjective obj(src, tgt, cam);
    const auto f = [&](const Eigen::Matrix<double, 7, 1>& x) {
      return obj.evaluate(PoseParams::from_vector(x), 1.0, 5e-2, use2d, false).loss;
    };
    const auto g = obj.evaluate(pose, 1.0, 5e-2, use2d).grad.to_vector();
    const auto fd = oracle::central_difference(f, pose.to_vector(), 1e-5);
    for (int k = 0; k < 7; ++k) EXPECT_LT(std::abs(g(k) - fd(k)) / std::abs(fd(k)), 1e-4) << "instance " << checked;
    ++checked;
  }
  EXPECT_LT(redrawn, 20);
}

TEST(Chamfer, ReverseIndexTrickMatchesReindexing) {
  // Querying target points against the unposed source in the source frame
  // must find the same neighbours as indexing the posed source directly.
  std::mt19937_64 rng(37);
  const auto src = oracle::random_points(rng, 200);
  const auto tgt = oracle::random_points(rng, 200);
  const ChamferObjective obj(src, tgt, front_camera());
  for (int i = 0; i < 10; ++i) {
    const auto pose = random_pose(rng, 0.3);
    std::vector<Vec3> posed;
    for (const auto& p : src) posed.push_back(pose.apply(p));
    const double want = oracle::brute_one_sided(posed, tgt) + oracle::brute_one_sided(tgt, posed);
    EXPECT_NEAR(obj.evaluate(pose, 1.0, 0.0, false, false).chamfer3d, want, 1e-10 * want);
  }
}
