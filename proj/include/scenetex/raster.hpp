#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"

namespace scenetex {

/// Per-pixel surface attributes of one rendered view.
struct GBuffer {
  int width = 0;
  int height = 0;
  std::vector<double> depth;           // camera-frame Z, +inf where empty
  std::vector<Vec3> normal;            // world-space unit normal
  std::vector<Vec3> position;          // world-space surface point
  std::vector<std::int32_t> triangle;  // -1 where empty
  std::vector<Vec3> barycentric;       // weights of the triangle's corners
  // Triangles whose projected bounds touch each kTile x kTile screen tile,
  // so point queries can be answered exactly by ray tests.
  static constexpr int kTile = 16;
  int tiles_x = 0;
  std::vector<std::vector<std::int32_t>> tiles;

  GBuffer() = default;
  GBuffer(int w, int h)
      : width(w),
        height(h),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()),
        normal(static_cast<std::size_t>(w) * h, Vec3::Zero()),
        position(static_cast<std::size_t>(w) * h, Vec3::Zero()),
        triangle(static_cast<std::size_t>(w) * h, -1),
        barycentric(static_cast<std::size_t>(w) * h, Vec3::Zero()),
        tiles_x((w + kTile - 1) / kTile),
        tiles(static_cast<std::size_t>(tiles_x) * ((h + kTile - 1) / kTile)) {}

  const std::vector<std::int32_t>& tile_at(double x, double y) const {
    const int tx = std::clamp(static_cast<int>(x) / kTile, 0, tiles_x - 1);
    const int ty = std::clamp(static_cast<int>(y) / kTile, 0, static_cast<int>(tiles.size()) / tiles_x - 1);
    return tiles[static_cast<std::size_t>(ty) * tiles_x + tx];
  }

  std::size_t size() const { return triangle.size(); }
  bool covered(std::size_t i) const { return triangle[i] >= 0; }
  bool covered(int x, int y) const { return triangle[static_cast<std::size_t>(y) * width + x] >= 0; }

  Mask coverage() const {
    Mask m(width, height, 1);
    for (std::size_t i = 0; i < size(); ++i) m.data[i] = covered(i) ? 1 : 0;
    return m;
  }
};

struct RasterOptions {
  bool smooth_normals = false;
  double near_plane = 1e-6;
};

namespace detail {

struct ClipVertex {
  Vec3 cam;   // camera-frame position
  Vec3 bary;  // weights w.r.t. the original triangle
};

inline std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Vec3 fn = (mesh.corner(t, 1) - mesh.corner(t, 0)).cross(mesh.corner(t, 2) - mesh.corner(t, 0));
    for (auto v : mesh.triangles[t]) n[v] += fn;  // area weighted
  }
  for (auto& v : n)
    if (v.norm() > 0.0) v.normalize();
  return n;
}

// Clip a polygon against z >= near (Sutherland-Hodgman on a single plane).
inline std::vector<ClipVertex> clip_near(const std::array<ClipVertex, 3>& tri, double near_z) {
  std::vector<ClipVertex> out;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = tri[i];
    const ClipVertex& b = tri[(i + 1) % 3];
    const bool a_in = a.cam.z() >= near_z;
    const bool b_in = b.cam.z() >= near_z;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double s = (near_z - a.cam.z()) / (b.cam.z() - a.cam.z());
      out.push_back({a.cam + s * (b.cam - a.cam), a.bary + s * (b.bary - a.bary)});
    }
  }
  return out;
}

}  // namespace detail

/// Z-buffered rasterization with perspective-correct interpolation and pixel
/// center sampling. The nearest surface wins; exact depth ties go to the lower
/// triangle id, so the result does not depend on submission order.
inline GBuffer rasterize(const TriangleMesh& mesh, const PinholeCamera& cam, const RasterOptions& opt = {}) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyInput, "rasterize on empty mesh");
  GBuffer g(cam.width(), cam.height());
  const std::vector<Vec3> vnormals = opt.smooth_normals ? detail::vertex_normals(mesh) : std::vector<Vec3>{};
  std::vector<Vec3> cam_vertices(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) cam_vertices[v] = cam.to_camera(mesh.vertices[v]);

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 flat = mesh.face_normal(t);
    if (flat.isZero()) continue;
    const std::array<detail::ClipVertex, 3> corners{{{cam_vertices[tri[0]], Vec3::UnitX()},
                                                     {cam_vertices[tri[1]], Vec3::UnitY()},
                                                     {cam_vertices[tri[2]], Vec3::UnitZ()}}};
    if (corners[0].cam.z() < opt.near_plane && corners[1].cam.z() < opt.near_plane &&
        corners[2].cam.z() < opt.near_plane)
      continue;
    const auto poly = detail::clip_near(corners, opt.near_plane);
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
      const std::array<const detail::ClipVertex*, 3> sub{&poly[0], &poly[k], &poly[k + 1]};
      std::array<Vec2, 3> s;
      std::array<double, 3> inv_z;
      for (int i = 0; i < 3; ++i) {
        const Vec3& c = sub[i]->cam;
        inv_z[i] = 1.0 / c.z();
        s[i] = Vec2(cam.fx() * c.x() * inv_z[i] + cam.cx(), cam.fy() * c.y() * inv_z[i] + cam.cy());
      }
      const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
      if (area == 0.0 || !std::isfinite(area)) continue;
      const double min_x = std::min({s[0].x(), s[1].x(), s[2].x()});
      const double max_x = std::max({s[0].x(), s[1].x(), s[2].x()});
      const double min_y = std::min({s[0].y(), s[1].y(), s[2].y()});
      const double max_y = std::max({s[0].y(), s[1].y(), s[2].y()});
      if (max_x >= 0.0 && max_y >= 0.0 && min_x < g.width && min_y < g.height) {
        const int rows = static_cast<int>(g.tiles.size()) / g.tiles_x;
        const int tx0 = std::max(0, static_cast<int>(min_x) / GBuffer::kTile);
        const int tx1 = std::min(g.tiles_x - 1, static_cast<int>(max_x) / GBuffer::kTile);
        const int ty0 = std::max(0, static_cast<int>(min_y) / GBuffer::kTile);
        const int ty1 = std::min(rows - 1, static_cast<int>(max_y) / GBuffer::kTile);
        for (int ty = ty0; ty <= ty1; ++ty)
          for (int tx = tx0; tx <= tx1; ++tx) {
            auto& bin = g.tiles[static_cast<std::size_t>(ty) * g.tiles_x + tx];
            if (bin.empty() || bin.back() != static_cast<std::int32_t>(t)) bin.push_back(static_cast<std::int32_t>(t));
          }
      }
      const int x0 = std::max(0, static_cast<int>(std::ceil(min_x - 0.5)));
      const int x1 = std::min(g.width - 1, static_cast<int>(std::floor(max_x - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(min_y - 0.5)));
      const int y1 = std::min(g.height - 1, static_cast<int>(std::floor(max_y - 0.5)));
      const double inv_area = 1.0 / area;
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const Vec2 p(x + 0.5, y + 0.5);
          // screen-space barycentrics of the sub-triangle
          const double l0 = ((s[1] - p).x() * (s[2] - p).y() - (s[1] - p).y() * (s[2] - p).x()) * inv_area;
          const double l1 = ((s[2] - p).x() * (s[0] - p).y() - (s[2] - p).y() * (s[0] - p).x()) * inv_area;
          const double l2 = 1.0 - l0 - l1;
          if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
          const double w0 = l0 * inv_z[0], w1 = l1 * inv_z[1], w2 = l2 * inv_z[2];
          const double wsum = w0 + w1 + w2;
          const double z = 1.0 / wsum;
          const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
          if (z > g.depth[i] || (z == g.depth[i] && static_cast<std::int32_t>(t) > g.triangle[i])) continue;
          const Vec3 bary = (w0 * sub[0]->bary + w1 * sub[1]->bary + w2 * sub[2]->bary) / wsum;
          g.depth[i] = z;
          g.triangle[i] = static_cast<std::int32_t>(t);
          g.barycentric[i] = bary;
          g.position[i] = bary(0) * mesh.vertices[tri[0]] + bary(1) * mesh.vertices[tri[1]] +
                          bary(2) * mesh.vertices[tri[2]];
          if (opt.smooth_normals) {
            const Vec3 n = bary(0) * vnormals[tri[0]] + bary(1) * vnormals[tri[1]] + bary(2) * vnormals[tri[2]];
            g.normal[i] = n.norm() > 0.0 ? Vec3(n.normalized()) : flat;
          } else {
            g.normal[i] = flat;
          }
        }
      }
    }
  }
  return g;
}

struct ViewHit {
  Pixel2 pixel;
  std::size_t index = 0;  // row-major pixel holding the projection
};

/// Camera-frame depth where the ray through `px` crosses triangle `tri`
/// inside its bounds (with a small barycentric slack), or nullopt.
inline std::optional<double> ray_triangle_depth(const TriangleMesh& mesh, const PinholeCamera& cam, std::size_t tri,
                                                const Pixel2& px) {
  const Vec3 a = cam.to_camera(mesh.corner(tri, 0));
  const Vec3 e1 = cam.to_camera(mesh.corner(tri, 1)) - a;
  const Vec3 e2 = cam.to_camera(mesh.corner(tri, 2)) - a;
  const Vec3 d = cam.ray_camera(px);
  const Vec3 p = d.cross(e2);
  const double det = e1.dot(p);
  if (det == 0.0) return std::nullopt;
  const Vec3 s = -a;
  const double u = s.dot(p) / det;
  const Vec3 q = s.cross(e1);
  const double v = d.dot(q) / det;
  constexpr double slack = 1e-9;
  if (u < -slack || v < -slack || u + v > 1.0 + slack) return std::nullopt;
  return e2.dot(q) / det * d.z();
}

/// Whether world point `p` (lying on triangle `own_triangle`, or -1 if
/// unknown) is the visible surface in a rendered view. The ray through p is
/// intersected with every triangle binned at its projection; p is visible
/// when none is hit more than `rel_tol` * depth in front of it (and, for an
/// unknown owner, one of them passes through p).
inline std::optional<ViewHit> visible_in_view(const TriangleMesh& mesh, const PinholeCamera& cam, const GBuffer& gbuf,
                                              const Vec3& p, std::int32_t own_triangle, double rel_tol) {
  const Vec3 pc = cam.to_camera(p);
  const auto px = cam.project_camera(pc);
  if (!px || !cam.in_image(*px)) return std::nullopt;
  const int ix = std::min(static_cast<int>(px->x()), gbuf.width - 1);
  const int iy = std::min(static_cast<int>(px->y()), gbuf.height - 1);
  const double tol = rel_tol * pc.z();
  bool on_surface = own_triangle >= 0;
  for (const std::int32_t t : gbuf.tile_at(px->x(), px->y())) {
    if (t == own_triangle) continue;
    const auto z = ray_triangle_depth(mesh, cam, static_cast<std::size_t>(t), *px);
    if (!z || *z <= 0.0) continue;
    if (*z < pc.z() - tol) return std::nullopt;
    if (std::abs(*z - pc.z()) <= tol) on_surface = true;
  }
  if (!on_surface) return std::nullopt;
  return ViewHit{*px, static_cast<std::size_t>(iy) * gbuf.width + ix};
}

/// Depth discontinuity and silhouette detector. A covered pixel is marked when
/// its central-difference depth gradient exceeds rel_threshold times the depth
/// range of the view, or when any of its 8 neighbours is empty or outside the image.
inline Mask edge_map(const GBuffer& g, double rel_threshold = 0.05) {
  Mask edges(g.width, g.height, 1, 0);
  double zmin = std::numeric_limits<double>::infinity(), zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.covered(i)) {
      zmin = std::min(zmin, g.depth[i]);
      zmax = std::max(zmax, g.depth[i]);
    }
  if (!(zmax >= zmin)) return edges;
  const double limit = rel_threshold * (zmax - zmin);
  // A depth range at rounding level means a flat view with no depth edges.
  const bool flat = (zmax - zmin) <= 1e-9 * zmax;

  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (!g.covered(x, y)) continue;
      bool silhouette = false;
      for (int dy = -1; dy <= 1 && !silhouette; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= g.width || ny >= g.height || !g.covered(nx, ny)) {
            silhouette = true;
            break;
          }
        }
      if (silhouette) {
        edges.at(x, y) = 1;
        continue;
      }
      if (flat) continue;
      auto depth_at = [&](int px, int py) { return g.depth[static_cast<std::size_t>(py) * g.width + px]; };
      const double gx = 0.5 * (depth_at(x + 1, y) - depth_at(x - 1, y));
      const double gy = 0.5 * (depth_at(x, y + 1) - depth_at(x, y - 1));
      if (std::sqrt(gx * gx + gy * gy) > limit) edges.at(x, y) = 1;
    }
  }
  return edges;
}

}  // namespace scenetex
