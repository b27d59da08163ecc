#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "scenetex/scene_extract.hpp"

using namespace scenetex;

namespace {

PinholeCamera small_camera() {
  return look_at(Vec3(0, -0.5, -2), Vec3(0, 0, 0.5), Vec3::UnitY(), 60, 60, 32, 24, 64, 48);
}

// Points on n . x = d spread over a square of half-size `extent`, with
// Gaussian noise along the normal.
PointCloud noisy_plane(const Vec3& n, double d, std::size_t count, double sigma, double extent, std::mt19937_64& rng) {
  const auto [e1, e2] = plane_basis(n);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::normal_distribution<double> noise(0.0, sigma);
  PointCloud c;
  for (std::size_t i = 0; i < count; ++i) c.points.push_back(d * n + u(rng) * e1 + u(rng) * e2 + noise(rng) * n);
  return c;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0)) * 180.0 / M_PI;
}

}  // namespace

TEST(Pointmap, RoundTripsThroughProjection) {
  const auto cam = small_camera();
  DepthMap depth(64, 48);
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<float> u(0.5f, 4.0f);
  for (auto& d : depth.depth) d = u(rng);
  depth.at(3, 4) = 0.0f;
  depth.at(5, 6) = std::numeric_limits<float>::quiet_NaN();
  depth.at(7, 8) = -1.0f;
  const auto pm = depth_to_pointmap(cam, depth);
  ASSERT_EQ(pm.cloud.size(), 64u * 48u - 3u);
  for (std::size_t i = 0; i < pm.cloud.size(); ++i) {
    const int x = static_cast<int>(pm.pixel[i] % 64), y = static_cast<int>(pm.pixel[i] / 64);
    const auto px = cam.project(pm.cloud.points[i]);
    ASSERT_TRUE(px);
    EXPECT_LT((*px - Pixel2(x + 0.5, y + 0.5)).norm(), 1e-9);
    EXPECT_NEAR(cam.to_camera(pm.cloud.points[i]).z(), depth.at(x, y), 1e-6);
  }
  EXPECT_THROW(depth_to_pointmap(look_at(Vec3(0, 0, -1), Vec3::Zero(), Vec3::UnitY(), 1, 1, 1, 1, 2, 2), depth),
               Error);
  try {
    depth_to_pointmap(cam, DepthMap(64, 48, 0.0f));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
}

TEST(Pointmap, ColorsFollowPixels) {
  const auto cam = small_camera();
  DepthMap depth(64, 48, 2.0f);
  RgbImage img(64, 48, 3);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y, 0) = static_cast<float>(x) / 64.0f;
  const auto pm = depth_to_pointmap(cam, depth, &img);
  ASSERT_TRUE(pm.cloud.has_colors());
  EXPECT_FLOAT_EQ(static_cast<float>(pm.cloud.colors[70].x()), 6.0f / 64.0f);
}

TEST(SegmentInstance, SelectsMaskedPixelsOrThrows) {
  const auto cam = small_camera();
  DepthMap depth(64, 48, 2.0f);
  depth.at(10, 10) = 0.0f;
  const auto pm = depth_to_pointmap(cam, depth);
  Mask mask(64, 48, 1, 0);
  for (int x = 10; x < 20; ++x) mask.at(x, 10) = 1;
  const auto inst = segment_instance(pm, mask);
  EXPECT_EQ(inst.cloud.size(), 9u);
  Mask only_invalid(64, 48, 1, 0);
  only_invalid.at(10, 10) = 1;
  try {
    segment_instance(pm, only_invalid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInstance);
  }
}

TEST(Outliers, RemovesIsolatedPoints) {
  std::mt19937_64 rng(52);
  PointCloud c;
  c.points = oracle::random_points(rng, 500, -0.5, 0.5);
  c.points.push_back(Vec3(10, 10, 10));
  c.points.push_back(Vec3(-8, 3, 2));
  const auto r = remove_outliers(c, 16, 2.0);
  EXPECT_FALSE(r.passthrough);
  EXPECT_EQ(std::count(r.kept.begin(), r.kept.end(), 500u), 0);
  EXPECT_EQ(std::count(r.kept.begin(), r.kept.end(), 501u), 0);
  EXPECT_GT(r.kept.size(), 450u);
  PointCloud tiny;
  tiny.points = {Vec3::Zero(), Vec3::UnitX()};
  EXPECT_TRUE(remove_outliers(tiny, 16).passthrough);
}

TEST(Normals, PlaneNormalsFaceViewpoint) {
  std::mt19937_64 rng(53);
  auto c = noisy_plane(Vec3::UnitY(), 1.0, 600, 0.0, 1.0, rng);
  const auto r = estimate_normals(c, 12, Vec3(0, 5, 0));
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(r.valid[i], 1);
    EXPECT_NEAR(r.cloud.normals[i].dot(Vec3::UnitY()), 1.0, 1e-9);
  }
  PointCloud line;
  for (int i = 0; i < 20; ++i) line.points.push_back(Vec3(i, 0, 0));
  const auto l = estimate_normals(line, 5, Vec3(0, 1, 0));
  EXPECT_EQ(l.valid[3], 0);
}

TEST(FitPlanes, RecoversNoisyPlanesWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 normal = Vec3(n(rng), n(rng), n(rng)).normalized();
    const double offset = 0.5 + std::abs(n(rng));
    const auto cloud = noisy_plane(normal, offset, 2000, 0.005, 1.0, rng);
    PlaneFitOptions opt;
    opt.seed = seed;
    opt.inlier_tol = 0.015;
    const auto planes = fit_planes(cloud, opt);
    ASSERT_FALSE(planes.empty());
    Vec3 got = planes[0].normal;
    double d = planes[0].offset;
    if (got.dot(normal) < 0) {
      got = -got;
      d = -d;
    }
    EXPECT_LT(angle_deg(got, normal), 1.0) << "seed " << seed;
    EXPECT_NEAR(d, offset, 0.01) << "seed " << seed;
  }
}

TEST(FitPlanes, SeparatesFloorAndWall) {
  std::mt19937_64 rng(54);
  auto floor = noisy_plane(Vec3::UnitY(), -0.6, 1500, 0.002, 1.0, rng);
  const auto wall = noisy_plane(Vec3::UnitZ(), 3.0, 1000, 0.002, 1.0, rng);
  floor.points.insert(floor.points.end(), wall.points.begin(), wall.points.end());
  const auto planes = fit_planes(floor);
  ASSERT_GE(planes.size(), 2u);
  EXPECT_LT(angle_deg(planes[0].normal, Vec3::UnitY()), 1.0);
  EXPECT_LT(angle_deg(planes[1].normal, Vec3::UnitZ()), 1.0);
  EXPECT_GE(planes[0].offset, 0.0);
  EXPECT_EQ(fit_planes(floor).size(), planes.size());
}

TEST(PlaneMesh, GridTriangleCountAndPlanarity) {
  std::mt19937_64 rng(55);
  Plane plane;
  plane.normal = Vec3(0, 1, 1).normalized();
  plane.offset = 0.7;
  const auto inliers = noisy_plane(plane.normal, plane.offset, 300, 0.0, 0.8, rng);
  for (int res : {2, 5, 64}) {
    const auto mesh = plane_to_mesh(plane, inliers, res);
    EXPECT_EQ(mesh.triangles.size(), static_cast<std::size_t>(2 * (res - 1) * (res - 1)));
    EXPECT_EQ(mesh.uvs.size(), 3 * mesh.triangles.size());
    for (const auto& v : mesh.vertices) EXPECT_NEAR(plane.signed_distance(v), 0.0, 1e-12);
    EXPECT_NO_THROW(mesh.validate());
  }
  PointCloud line;
  for (int i = 0; i < 10; ++i) line.points.push_back(plane.offset * plane.normal + i * Vec3::UnitX());
  try {
    plane_to_mesh(plane, line);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegeneratePlane);
  }
}
