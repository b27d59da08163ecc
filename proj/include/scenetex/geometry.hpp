#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "scenetex/error.hpp"

namespace scenetex {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Point3 = Vec3;
using Pixel2 = Vec2;

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool empty() const { return !(min.array() <= max.array()).all(); }
  Vec3 extent() const { return empty() ? Vec3::Zero() : Vec3(max - min); }
  double diagonal() const { return extent().norm(); }
  Vec3 center() const { return 0.5 * (min + max); }
};

/// Positions with optional per-point colors (RGB in [0,1]) and unit normals.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_normals() const { return !normals.empty(); }

  void validate() const {
    if (has_colors() && colors.size() != points.size())
      throw Error(ErrorCode::InvalidInput, "point cloud color count does not match point count");
    if (has_normals() && normals.size() != points.size())
      throw Error(ErrorCode::InvalidInput, "point cloud normal count does not match point count");
    for (const auto& p : points)
      if (!p.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite point");
    for (const auto& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6) throw Error(ErrorCode::InvalidInput, "normal is not unit length");
  }

  Aabb bounds() const {
    Aabb box;
    for (const auto& p : points) box.extend(p);
    return box;
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return points.empty() ? c : Vec3(c / static_cast<double>(points.size()));
  }

  // Keeps the attributes of the listed points, in the given order.
  PointCloud subset(const std::vector<std::size_t>& indices) const {
    PointCloud out;
    out.points.reserve(indices.size());
    for (auto i : indices) out.points.push_back(points[i]);
    if (has_colors())
      for (auto i : indices) out.colors.push_back(colors[i]);
    if (has_normals())
      for (auto i : indices) out.normals.push_back(normals[i]);
    return out;
  }
};

using Triangle = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. `uvs` holds one coordinate per triangle corner
/// (3 * triangles.size()), with v = 0 at the top row of the texture image.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::vector<Vec2> uvs;
  std::vector<Vec3> vertex_colors;

  bool empty() const { return triangles.empty(); }
  bool has_uvs() const { return !uvs.empty(); }

  Vec2 uv(std::size_t tri, int corner) const { return uvs[3 * tri + static_cast<std::size_t>(corner)]; }

  Vec3 corner(std::size_t tri, int corner) const { return vertices[triangles[tri][static_cast<std::size_t>(corner)]]; }

  Vec3 face_normal(std::size_t tri) const {
    const Vec3 n = (corner(tri, 1) - corner(tri, 0)).cross(corner(tri, 2) - corner(tri, 0));
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
  }

  double area(std::size_t tri) const {
    return 0.5 * (corner(tri, 1) - corner(tri, 0)).cross(corner(tri, 2) - corner(tri, 0)).norm();
  }

  Aabb bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.extend(v);
    return box;
  }

  void validate() const {
    for (const auto& v : vertices)
      if (!v.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite mesh vertex");
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      for (auto idx : triangles[t])
        if (idx >= vertices.size()) throw Error(ErrorCode::InvalidInput, "triangle index out of range");
      if (area(t) <= 1e-12) throw Error(ErrorCode::InvalidInput, "degenerate triangle " + std::to_string(t));
    }
    if (has_uvs()) {
      if (uvs.size() != 3 * triangles.size())
        throw Error(ErrorCode::InvalidInput, "uv count must be three per triangle");
      for (const auto& uv : uvs)
        if (!uv.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite uv");
    }
    if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
      throw Error(ErrorCode::InvalidInput, "vertex color count does not match vertex count");
  }

  // Drops triangles whose area is at or below `min_area`, along with their uvs.
  void remove_degenerate(double min_area = 1e-12) {
    std::vector<Triangle> kept;
    std::vector<Vec2> kept_uvs;
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      if (area(t) <= min_area) continue;
      kept.push_back(triangles[t]);
      if (has_uvs())
        for (int c = 0; c < 3; ++c) kept_uvs.push_back(uv(t, c));
    }
    triangles = std::move(kept);
    uvs = std::move(kept_uvs);
  }
};

/// Rotation matrix for an axis-angle vector (Rodrigues).
inline Mat3 rotation_from_axis_angle(const Vec3& r) {
  const double theta = r.norm();
  Mat3 K;
  K << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
  double a, b;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  return Mat3::Identity() + a * K + b * K * K;
}

/// Learnable similarity transform: p' = exp(log_scale) * R(rotation) * p + translation.
struct PoseParams {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // axis-angle, radians
  double log_scale = 0.0;

  static PoseParams identity() { return {}; }

  double scale() const { return std::exp(log_scale); }
  Mat3 rotation_matrix() const { return rotation_from_axis_angle(rotation); }
  bool finite() const { return translation.allFinite() && rotation.allFinite() && std::isfinite(log_scale); }

  Vec3 apply(const Vec3& p) const { return scale() * (rotation_matrix() * p) + translation; }

  Eigen::Matrix<double, 7, 1> to_vector() const {
    Eigen::Matrix<double, 7, 1> v;
    v << translation, rotation, log_scale;
    return v;
  }
  static PoseParams from_vector(const Eigen::Matrix<double, 7, 1>& v) {
    PoseParams p;
    p.translation = v.segment<3>(0);
    p.rotation = v.segment<3>(3);
    p.log_scale = v(6);
    return p;
  }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = scale() * rotation_matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

inline PointCloud apply_pose(const PoseParams& pose, const PointCloud& cloud) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "apply_pose on empty cloud");
  const Mat3 sr = pose.scale() * pose.rotation_matrix();
  PointCloud out = cloud;
  for (auto& p : out.points) p = sr * p + pose.translation;
  if (out.has_normals()) {
    const Mat3 rot = pose.rotation_matrix();
    for (auto& n : out.normals) n = (rot * n).normalized();
  }
  return out;
}

inline TriangleMesh apply_pose(const PoseParams& pose, TriangleMesh mesh) {
  const Mat3 sr = pose.scale() * pose.rotation_matrix();
  for (auto& v : mesh.vertices) v = sr * v + pose.translation;
  return mesh;
}

/// Pinhole camera. Camera frame: +Z forward, +X right, +Y down; pixel origin
/// at the top-left image corner, pixel (i, j) has its center at (i + 0.5, j + 0.5).
class PinholeCamera {
 public:
  static constexpr double kMinDepth = 1e-8;

  PinholeCamera() = default;

  PinholeCamera(double fx, double fy, double cx, double cy, int width, int height,
                const Mat4& world_from_camera = Mat4::Identity())
      : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height) {
    if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::InvalidInput, "focal lengths must be positive");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidInput, "image dimensions must be positive");
    if (!world_from_camera.allFinite()) throw Error(ErrorCode::InvalidInput, "non-finite camera pose");
    const Mat3 rot = world_from_camera.topLeftCorner<3, 3>();
    if ((rot.transpose() * rot - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(rot.determinant() - 1.0) > 1e-6)
      throw Error(ErrorCode::InvalidInput, "camera rotation is not orthonormal with det +1");
    rotation_wc_ = rot;
    center_ = world_from_camera.topRightCorner<3, 1>();
    rotation_cw_ = rot.transpose();
  }

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }

  // Rotation taking camera-frame directions to world directions.
  const Mat3& rotation_world_from_camera() const { return rotation_wc_; }
  const Mat3& rotation_camera_from_world() const { return rotation_cw_; }
  const Vec3& center() const { return center_; }
  Vec3 forward() const { return rotation_wc_.col(2); }

  Mat4 world_from_camera() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation_wc_;
    m.topRightCorner<3, 1>() = center_;
    return m;
  }

  Vec3 to_camera(const Vec3& world) const { return rotation_cw_ * (world - center_); }
  Vec3 to_world(const Vec3& cam) const { return rotation_wc_ * cam + center_; }

  /// Projects a camera-frame point; nullopt when it is behind (or on) the image plane.
  std::optional<Pixel2> project_camera(const Vec3& pc) const {
    if (!(pc.z() > kMinDepth)) return std::nullopt;
    return Pixel2(fx_ * pc.x() / pc.z() + cx_, fy_ * pc.y() / pc.z() + cy_);
  }

  std::optional<Pixel2> project(const Vec3& world) const { return project_camera(to_camera(world)); }

  /// World point at camera-frame depth `depth` along the ray through `px`.
  Vec3 unproject(const Pixel2& px, double depth) const {
    if (!(depth > 0.0) || !std::isfinite(depth)) throw Error(ErrorCode::InvalidDepth, "depth must be positive");
    return to_world(unproject_camera(px, depth));
  }

  Vec3 unproject_camera(const Pixel2& px, double depth) const {
    return Vec3((px.x() - cx_) / fx_ * depth, (px.y() - cy_) / fy_ * depth, depth);
  }

  // Camera-frame ray direction with unit z component.
  Vec3 ray_camera(const Pixel2& px) const { return Vec3((px.x() - cx_) / fx_, (px.y() - cy_) / fy_, 1.0); }

  bool in_image(const Pixel2& px) const { return px.x() >= 0.0 && px.y() >= 0.0 && px.x() < width_ && px.y() < height_; }

 private:
  double fx_ = 1.0, fy_ = 1.0, cx_ = 0.0, cy_ = 0.0;
  int width_ = 1, height_ = 1;
  Mat3 rotation_wc_ = Mat3::Identity();
  Mat3 rotation_cw_ = Mat3::Identity();
  Vec3 center_ = Vec3::Zero();
};

/// Camera at `eye` looking at `target`; image "up" follows `up` as closely as possible.
inline PinholeCamera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx, double fy, double cx,
                             double cy, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat4 m = Mat4::Identity();
  m.block<3, 1>(0, 0) = right;
  m.block<3, 1>(0, 1) = down;
  m.block<3, 1>(0, 2) = forward;
  m.block<3, 1>(0, 3) = eye;
  return PinholeCamera(fx, fy, cx, cy, width, height, m);
}

}  // namespace scenetex
