#pragma once

#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"

// Procedural test assets shared by the tests, the acceptance suite and the
// CLI `fixture` command.
namespace scenetex::fixtures {

/// Unit icosphere with `subdivisions` rounds of 4-way splitting.
inline TriangleMesh icosphere(int subdivisions, double radius = 1.0) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.triangles = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                 {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                 {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      if (auto it = mid.find(key); it != mid.end()) return it->second;
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      const auto id = static_cast<std::uint32_t>(m.vertices.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(m.triangles.size() * 4);
    for (const auto& tri : m.triangles) {
      const auto ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.triangles = std::move(next);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

/// Asymmetric closed blob: an icosphere with a direction-dependent radius and
/// unequal axis scales, so that no nontrivial similarity maps it to itself.
inline TriangleMesh blob(int subdivisions = 4) {
  TriangleMesh m = icosphere(subdivisions);
  for (auto& v : m.vertices) {
    const Vec3 d = v.normalized();
    const double r = 0.5 * (1.0 + 0.25 * d.x() + 0.15 * d.y() * d.z() + 0.2 * d.x() * d.y());
    v = Vec3(r * d.x(), 0.7 * r * d.y(), 0.5 * r * d.z());
  }
  return m;
}

/// Axis-aligned cube of side `size` centered at the origin, 8 vertices and
/// 12 outward-facing triangles. Each face owns one cell of a 3 x 3 uv grid
/// (cells 0..5 in row-major order, the last row partly unused), inset by
/// `margin` (in uv units) so neighbouring charts never touch.
inline TriangleMesh cube(double size = 1.0, double margin = 1.0 / 64.0) {
  const double h = 0.5 * size;
  TriangleMesh m;
  m.vertices = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h}, {-h, -h, h}, {h, -h, h}, {h, h, h}, {-h, h, h}};
  // Faces as quads (a, b, c, d) counter-clockwise seen from outside:
  // +Z, +X, -Z, -X, +Y, -Y.
  const std::array<std::array<std::uint32_t, 4>, 6> quads{{{4, 5, 6, 7},
                                                           {5, 1, 2, 6},
                                                           {1, 0, 3, 2},
                                                           {0, 4, 7, 3},
                                                           {7, 6, 2, 3},
                                                           {0, 1, 5, 4}}};
  const double cell = 1.0 / 3.0;
  for (std::size_t f = 0; f < quads.size(); ++f) {
    const auto& q = quads[f];
    const double u0 = static_cast<double>(f % 3) * cell + margin, u1 = static_cast<double>(f % 3 + 1) * cell - margin;
    const double v0 = static_cast<double>(f / 3) * cell + margin, v1 = static_cast<double>(f / 3 + 1) * cell - margin;
    // quad corner a sits at the bottom-left of its chart (v grows downward).
    const std::array<Vec2, 4> uv{Vec2(u0, v1), Vec2(u1, v1), Vec2(u1, v0), Vec2(u0, v0)};
    m.triangles.push_back({q[0], q[1], q[2]});
    m.uvs.insert(m.uvs.end(), {uv[0], uv[1], uv[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
    m.uvs.insert(m.uvs.end(), {uv[0], uv[2], uv[3]});
  }
  return m;
}

/// Checkerboard texture in uv space with `squares` squares per unit and
/// the two tones `dark` and `light` tinted per 3 x 3 grid cell.
inline RgbImage checker_texture(int resolution, int squares = 12, float dark = 0.0f, float light = 1.0f) {
  static const std::array<std::array<float, 3>, 9> tint{{{1.0f, 0.55f, 0.55f},
                                                         {0.55f, 1.0f, 0.55f},
                                                         {0.55f, 0.55f, 1.0f},
                                                         {1.0f, 1.0f, 0.55f},
                                                         {0.55f, 1.0f, 1.0f},
                                                         {1.0f, 0.55f, 1.0f},
                                                         {1.0f, 1.0f, 1.0f},
                                                         {1.0f, 1.0f, 1.0f},
                                                         {1.0f, 1.0f, 1.0f}}};
  RgbImage img(resolution, resolution, 3, 0.0f);
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const double u = (x + 0.5) / resolution, v = (y + 0.5) / resolution;
      const int sx = static_cast<int>(std::floor(u * squares)), sy = static_cast<int>(std::floor(v * squares));
      const float tone = ((sx + sy) % 2 == 0) ? light : dark;
      const auto cell = static_cast<std::size_t>(std::min(2, static_cast<int>(v * 3)) * 3 + std::min(2, static_cast<int>(u * 3)));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = tone * tint[cell][static_cast<std::size_t>(c)];
    }
  }
  return img;
}

}  // namespace scenetex::fixtures
