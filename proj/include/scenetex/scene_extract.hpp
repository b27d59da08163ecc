#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"
#include "scenetex/kdtree.hpp"
#include "scenetex/sampling.hpp"

namespace scenetex {

/// Camera-frame Z per pixel; non-positive or non-finite values are invalid.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> depth;

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f) : width(w), height(h), depth(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return depth[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  bool valid(std::size_t i) const { return std::isfinite(depth[i]) && depth[i] > 0.0f; }
};

struct InstanceMask {
  Mask mask;  // 1 = instance pixel
  std::string label;
  int id = 0;
};

/// World-space points from a depth map, each tagged with its source pixel.
struct Pointmap {
  int width = 0;
  int height = 0;
  PointCloud cloud;
  std::vector<std::uint32_t> pixel;  // row-major source pixel per point
};

inline Pointmap depth_to_pointmap(const PinholeCamera& cam, const DepthMap& depth, const RgbImage* colors = nullptr) {
  if (depth.width != cam.width() || depth.height != cam.height())
    throw Error(ErrorCode::InvalidInput, "depth map dimensions do not match the camera");
  if (colors && (colors->width != depth.width || colors->height != depth.height || colors->channels < 3))
    throw Error(ErrorCode::InvalidInput, "color image dimensions do not match the depth map");
  Pointmap out;
  out.width = depth.width;
  out.height = depth.height;
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      const auto i = static_cast<std::size_t>(y) * depth.width + x;
      if (!depth.valid(i)) continue;
      out.cloud.points.push_back(cam.unproject(Pixel2(x + 0.5, y + 0.5), depth.depth[i]));
      out.pixel.push_back(static_cast<std::uint32_t>(i));
      if (colors) out.cloud.colors.emplace_back(colors->at(x, y, 0), colors->at(x, y, 1), colors->at(x, y, 2));
    }
  }
  if (out.cloud.empty()) throw Error(ErrorCode::EmptyInput, "depth map has no valid pixels");
  return out;
}

/// Points whose source pixel is set in the mask.
inline Pointmap segment_instance(const Pointmap& pointmap, const Mask& mask) {
  if (pointmap.pixel.size() != pointmap.cloud.size())
    throw Error(ErrorCode::InvalidInput, "pointmap lacks pixel provenance");
  if (mask.width != pointmap.width || mask.height != pointmap.height)
    throw Error(ErrorCode::InvalidInput, "mask dimensions do not match the depth map");
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < pointmap.pixel.size(); ++i)
    if (mask.data[pointmap.pixel[i]] != 0) keep.push_back(i);
  if (keep.empty()) throw Error(ErrorCode::EmptyInstance, "mask selects no valid depth pixels");
  Pointmap out;
  out.width = pointmap.width;
  out.height = pointmap.height;
  out.cloud = pointmap.cloud.subset(keep);
  for (auto i : keep) out.pixel.push_back(pointmap.pixel[i]);
  return out;
}

struct OutlierResult {
  PointCloud cloud;
  std::vector<std::size_t> kept;  // indices into the input
  bool passthrough = false;       // input too small for k neighbours
};

/// Statistical outlier removal: drops points whose mean distance to their k
/// nearest neighbours exceeds the global mean by more than sigma_mult stddevs.
inline OutlierResult remove_outliers(const PointCloud& cloud, std::size_t k = 16, double sigma_mult = 2.0) {
  OutlierResult out;
  if (cloud.size() <= k || k == 0) {
    out.cloud = cloud;
    out.kept.resize(cloud.size());
    std::iota(out.kept.begin(), out.kept.end(), std::size_t{0});
    out.passthrough = true;
    return out;
  }
  const auto index = make_index(cloud.points);
  std::vector<double> mean_dist(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = index.knn(to_array(cloud.points[i]), k + 1);
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& n : nbrs) {
      if (n.index == i || used == k) continue;
      sum += std::sqrt(n.sq_dist);
      ++used;
    }
    mean_dist[i] = sum / static_cast<double>(used);
  }
  const double mean = std::accumulate(mean_dist.begin(), mean_dist.end(), 0.0) / static_cast<double>(mean_dist.size());
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  const double stddev = std::sqrt(var / static_cast<double>(mean_dist.size()));
  const double limit = mean + sigma_mult * stddev;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (mean_dist[i] <= limit) out.kept.push_back(i);
  out.cloud = cloud.subset(out.kept);
  return out;
}

struct NormalResult {
  PointCloud cloud;            // input with normals filled in
  std::vector<std::uint8_t> valid;  // 0 where the neighbourhood was degenerate
};

/// PCA normals from k-nearest neighbourhoods, oriented toward `viewpoint`.
/// Degenerate neighbourhoods (collinear or coincident) are flagged and get the
/// unit direction toward the viewpoint as a placeholder.
inline NormalResult estimate_normals(const PointCloud& cloud, std::size_t k, const Vec3& viewpoint) {
  if (cloud.size() <= k || k < 3) throw Error(ErrorCode::InvalidInput, "estimate_normals needs more than k >= 3 points");
  const auto index = make_index(cloud.points);
  NormalResult out;
  out.cloud = cloud;
  out.cloud.normals.assign(cloud.size(), Vec3::UnitZ());
  out.valid.assign(cloud.size(), 1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    Vec3 toward = viewpoint - p;
    toward = toward.norm() > 0.0 ? Vec3(toward.normalized()) : Vec3::UnitZ();
    const auto nbrs = index.knn(to_array(p), k);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nbrs) mean += cloud.points[n.index];
    mean /= static_cast<double>(nbrs.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nbrs) {
      const Vec3 d = cloud.points[n.index] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
    const Vec3 ev = solver.eigenvalues();  // ascending
    if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
      out.valid[i] = 0;
      out.cloud.normals[i] = toward;
      continue;
    }
    Vec3 n = solver.eigenvectors().col(0).normalized();
    if (n.dot(toward) < 0.0) n = -n;
    out.cloud.normals[i] = n;
  }
  return out;
}

/// Plane n . x = d with unit normal and the indices of its inliers.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  std::vector<std::size_t> inliers;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
};

struct PlaneFitOptions {
  int max_planes = 6;
  double inlier_tol = 0.01;
  std::size_t min_inliers = 0;  // 0 = 5% of the cloud
  int iterations = 1000;
  std::uint64_t seed = 0;
};

namespace detail {

// Least-squares plane through the given points; normal sign fixed so that d >= 0.
inline bool fit_plane_lsq(const std::vector<Vec3>& pts, const std::vector<std::size_t>& idx, Vec3& normal,
                          double& offset) {
  if (idx.size() < 3) return false;
  Vec3 mean = Vec3::Zero();
  for (auto i : idx) mean += pts[i];
  mean /= static_cast<double>(idx.size());
  Mat3 cov = Mat3::Zero();
  for (auto i : idx) {
    const Vec3 d = pts[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.eigenvalues()(1) <= 1e-15 * std::max(1.0, solver.eigenvalues()(2))) return false;
  normal = solver.eigenvectors().col(0).normalized();
  offset = normal.dot(mean);
  return true;
}

inline void canonical_sign(Vec3& normal, double& offset) {
  bool flip = offset < 0.0;
  if (offset == 0.0) {
    for (int a = 0; a < 3; ++a)
      if (normal(a) != 0.0) {
        flip = normal(a) < 0.0;
        break;
      }
  }
  if (flip) {
    normal = -normal;
    offset = -offset;
  }
}

}  // namespace detail

/// Sequential RANSAC: extract the best-supported plane, refine it by least
/// squares, remove its inliers and repeat. Deterministic for a given seed.
inline std::vector<Plane> fit_planes(const PointCloud& cloud, const PlaneFitOptions& opt = {}) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "fit_planes on empty cloud");
  if (!(opt.inlier_tol > 0.0)) throw Error(ErrorCode::InvalidInput, "inlier tolerance must be positive");
  const std::size_t min_inliers =
      std::max<std::size_t>(3, opt.min_inliers > 0 ? opt.min_inliers : static_cast<std::size_t>(0.05 * cloud.size()));
  const auto& pts = cloud.points;
  std::vector<std::size_t> remaining(cloud.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  auto rng = make_rng(opt.seed, 0x91a4e);

  auto collect = [&](const Vec3& n, double d) {
    std::vector<std::size_t> in;
    for (auto i : remaining)
      if (std::abs(n.dot(pts[i]) - d) <= opt.inlier_tol) in.push_back(i);
    return in;
  };

  std::vector<Plane> planes;
  while (static_cast<int>(planes.size()) < opt.max_planes && remaining.size() >= min_inliers) {
    std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
    std::size_t best_count = 0;
    Vec3 best_n = Vec3::UnitZ();
    double best_d = 0.0;
    for (int it = 0; it < opt.iterations; ++it) {
      const Vec3& a = pts[remaining[pick(rng)]];
      const Vec3& b = pts[remaining[pick(rng)]];
      const Vec3& c = pts[remaining[pick(rng)]];
      Vec3 n = (b - a).cross(c - a);
      const double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      const double d = n.dot(a);
      std::size_t count = 0;
      for (auto i : remaining)
        if (std::abs(n.dot(pts[i]) - d) <= opt.inlier_tol) ++count;
      if (count > best_count) {
        best_count = count;
        best_n = n;
        best_d = d;
      }
    }
    if (best_count < min_inliers) break;

    auto inliers = collect(best_n, best_d);
    for (int refine = 0; refine < 3; ++refine) {
      Vec3 n;
      double d;
      if (!detail::fit_plane_lsq(pts, inliers, n, d)) break;
      auto next = collect(n, d);
      if (next.size() < inliers.size() / 2) break;
      best_n = n;
      best_d = d;
      inliers = std::move(next);
    }
    if (inliers.size() < min_inliers) break;

    Plane plane;
    plane.normal = best_n;
    plane.offset = best_d;
    detail::canonical_sign(plane.normal, plane.offset);
    plane.inliers = inliers;
    std::vector<std::size_t> rest;
    std::set_difference(remaining.begin(), remaining.end(), inliers.begin(), inliers.end(), std::back_inserter(rest));
    remaining = std::move(rest);
    planes.push_back(std::move(plane));
  }
  return planes;
}

/// Orthonormal in-plane axes (e1, e2) with e1 x e2 = normal.
inline std::pair<Vec3, Vec3> plane_basis(const Vec3& normal) {
  const Vec3 helper = std::abs(normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = helper.cross(normal).normalized();
  const Vec3 e2 = normal.cross(e1);
  return {e1, e2};
}

/// Regular grid mesh spanning the inliers' bounding rectangle in plane
/// coordinates. Vertices lie on the plane; colors come from the nearest
/// projected inlier.
inline TriangleMesh plane_to_mesh(const Plane& plane, const PointCloud& inliers, int resolution = 64) {
  if (inliers.size() < 3) throw Error(ErrorCode::DegeneratePlane, "plane meshing needs at least 3 inliers");
  if (resolution < 2) throw Error(ErrorCode::InvalidInput, "grid resolution must be >= 2");
  const auto [e1, e2] = plane_basis(plane.normal);
  std::vector<Vec2> coords;
  coords.reserve(inliers.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  Vec2 mean = Vec2::Zero();
  for (const auto& p : inliers.points) {
    coords.emplace_back(e1.dot(p), e2.dot(p));
    mean += coords.back();
  }
  mean /= static_cast<double>(coords.size());
  for (const auto& c : coords) cov += (c - mean) * (c - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(cov);
  if (!(solver.eigenvalues()(1) > 0.0) || solver.eigenvalues()(0) <= 1e-12 * solver.eigenvalues()(1))
    throw Error(ErrorCode::DegeneratePlane, "plane inliers are collinear");

  Vec2 lo = coords.front(), hi = coords.front();
  for (const auto& c : coords) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  const Vec3 origin = plane.offset * plane.normal;
  const bool colored = inliers.has_colors();
  KdTree2 index;
  if (colored) index = make_index(coords);

  TriangleMesh mesh;
  const int n = resolution;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = lo.x() + (hi.x() - lo.x()) * i / (n - 1);
      const double b = lo.y() + (hi.y() - lo.y()) * j / (n - 1);
      mesh.vertices.push_back(origin + a * e1 + b * e2);
      if (colored) mesh.vertex_colors.push_back(inliers.colors[index.nearest({a, b}).index]);
    }
  }
  auto vid = [n](int i, int j) { return static_cast<std::uint32_t>(j * n + i); };
  auto uv_of = [n](int i, int j) { return Vec2(static_cast<double>(i) / (n - 1), 1.0 - static_cast<double>(j) / (n - 1)); };
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      mesh.uvs.insert(mesh.uvs.end(), {uv_of(i, j), uv_of(i + 1, j), uv_of(i + 1, j + 1)});
      mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      mesh.uvs.insert(mesh.uvs.end(), {uv_of(i, j), uv_of(i + 1, j + 1), uv_of(i, j + 1)});
    }
  }
  return mesh;
}

}  // namespace scenetex
