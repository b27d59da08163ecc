#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"
#include "scenetex/raster.hpp"
#include "scenetex/views.hpp"

namespace scenetex {

enum class ConfidenceMode { Cosine, Binary };

struct ConfidenceOptions {
  double alpha_deg = 60.0;  // grazing-angle cutoff
  ConfidenceMode mode = ConfidenceMode::Cosine;
};

/// Per-pixel confidence of one view.
struct ConfidenceMap {
  int width = 0;
  int height = 0;
  std::vector<float> value;
};

/// c = w * cos(theta) where theta (angle between the surface normal and the
/// direction to the camera) is within alpha; zero past alpha, on edge pixels
/// and off the surface.
inline ConfidenceMap view_confidence(const GBuffer& g, const PinholeCamera& cam, const Mask& edges, double weight,
                                     const ConfidenceOptions& opt = {}) {
  if (edges.width != g.width || edges.height != g.height || cam.width() != g.width || cam.height() != g.height)
    throw Error(ErrorCode::ShapeError, "confidence inputs differ in size");
  ConfidenceMap c{g.width, g.height, std::vector<float>(g.size(), 0.0f)};
  const double cos_alpha = std::cos(opt.alpha_deg * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.covered(i) || edges.data[i]) continue;
    const Vec3 to_camera = (cam.center() - g.position[i]).normalized();
    const double cos_theta = g.normal[i].dot(to_camera);
    if (cos_theta < cos_alpha || cos_theta <= 0.0) continue;
    c.value[i] = static_cast<float>(weight * (opt.mode == ConfidenceMode::Cosine ? std::min(cos_theta, 1.0) : 1.0));
  }
  return c;
}

/// UV-space result of baking. `color` is meaningful only where `valid` is set.
struct TexelAtlas {
  int width = 0;
  int height = 0;
  std::vector<std::array<float, 3>> color;
  std::vector<float> confidence;  // total accumulated confidence
  std::vector<std::uint8_t> valid;

  TexelAtlas() = default;
  TexelAtlas(int w, int h)
      : width(w),
        height(h),
        color(static_cast<std::size_t>(w) * h, {0.0f, 0.0f, 0.0f}),
        confidence(static_cast<std::size_t>(w) * h, 0.0f),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t size() const { return valid.size(); }
  std::size_t valid_count() const { return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1)); }

  RgbImage image() const {
    RgbImage img(width, height, 3, 0.0f);
    for (std::size_t i = 0; i < size(); ++i)
      if (valid[i])
        for (int c = 0; c < 3; ++c) img.data[3 * i + c] = color[i][c];
    return img;
  }

  Mask validity() const {
    Mask m(width, height, 1);
    m.data = valid;
    return m;
  }
};

/// Texel ownership in UV space: triangle id and barycentrics per texel center.
struct UvRaster {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> triangle;
  std::vector<Vec3> barycentric;
};

inline UvRaster rasterize_uv(const TriangleMesh& mesh, int width, int height) {
  if (!mesh.has_uvs()) throw Error(ErrorCode::MissingUVs, "mesh has no texture coordinates");
  UvRaster r{width, height, std::vector<std::int32_t>(static_cast<std::size_t>(width) * height, -1),
             std::vector<Vec3>(static_cast<std::size_t>(width) * height, Vec3::Zero())};
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    std::array<Vec2, 3> s;
    for (int k = 0; k < 3; ++k) s[k] = Vec2(mesh.uv(t, k).x() * width, mesh.uv(t, k).y() * height);
    const double area = (s[1] - s[0]).x() * (s[2] - s[0]).y() - (s[1] - s[0]).y() * (s[2] - s[0]).x();
    if (area == 0.0 || !std::isfinite(area)) continue;
    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].x(), s[1].x(), s[2].x()}) - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(std::max({s[0].x(), s[1].x(), s[2].x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({s[0].y(), s[1].y(), s[2].y()}) - 0.5)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(std::max({s[0].y(), s[1].y(), s[2].y()}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        if (r.triangle[i] >= 0) continue;  // lower id already owns it
        const Vec2 p(x + 0.5, y + 0.5);
        const double l0 = ((s[1] - p).x() * (s[2] - p).y() - (s[1] - p).y() * (s[2] - p).x()) / area;
        const double l1 = ((s[2] - p).x() * (s[0] - p).y() - (s[2] - p).y() * (s[0] - p).x()) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        r.triangle[i] = static_cast<std::int32_t>(t);
        r.barycentric[i] = Vec3(l0, l1, l2);
      }
    }
  }
  return r;
}

struct BakeOptions {
  double depth_tol = 1e-3;  // relative visibility tolerance
};

/// Texel-centric back-projection. Each texel recovers its surface point from
/// its UV triangle, then gathers bilinear color samples from every view in
/// which that point is visible, weighted by the view's confidence at the
/// sampled pixel. Colors are normalized by the total confidence; texels with
/// none stay invalid.
inline TexelAtlas bake(const TriangleMesh& mesh, const KnownViewSet& views, const std::vector<ConfidenceMap>& confs,
                       int atlas_width, int atlas_height, const BakeOptions& opt = {}) {
  if (!mesh.has_uvs()) throw Error(ErrorCode::MissingUVs, "mesh has no texture coordinates");
  if (confs.size() != views.size()) throw Error(ErrorCode::InvalidInput, "one confidence map per view is required");
  if (atlas_width <= 0 || atlas_height <= 0) throw Error(ErrorCode::InvalidInput, "atlas resolution must be positive");
  for (std::size_t v = 0; v < views.size(); ++v)
    if (confs[v].width != views[v].gbuffer.width || confs[v].height != views[v].gbuffer.height ||
        views[v].image.width != views[v].gbuffer.width || views[v].image.height != views[v].gbuffer.height)
      throw Error(ErrorCode::ShapeError, "view image, render and confidence sizes differ");

  const UvRaster uv = rasterize_uv(mesh, atlas_width, atlas_height);
  TexelAtlas atlas(atlas_width, atlas_height);
  for (std::size_t i = 0; i < atlas.size(); ++i) {
    const std::int32_t t = uv.triangle[i];
    if (t < 0) continue;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Vec3& b = uv.barycentric[i];
    const Vec3 p = b(0) * mesh.vertices[tri[0]] + b(1) * mesh.vertices[tri[1]] + b(2) * mesh.vertices[tri[2]];
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    double total = 0.0;
    for (std::size_t v = 0; v < views.size(); ++v) {
      const auto hit = visible_in_view(mesh, views[v].camera, views[v].gbuffer, p, t, opt.depth_tol);
      if (!hit) continue;
      const double w = confs[v].value[hit->index];
      if (!(w > 0.0)) continue;
      float rgb[3];
      sample_bilinear(views[v].image, hit->pixel.x(), hit->pixel.y(), rgb);
      for (int c = 0; c < 3; ++c) acc[c] += w * rgb[c];
      total += w;
    }
    if (!(total > 0.0)) continue;
    for (int c = 0; c < 3; ++c) atlas.color[i][c] = static_cast<float>(acc[c] / total);
    atlas.confidence[i] = static_cast<float>(total);
    atlas.valid[i] = 1;
  }
  return atlas;
}

/// Fills invalid texels within Chebyshev distance `radius` of a valid texel
/// with the color of the nearest (Euclidean) valid texel; ties go to the first
/// in row-major order. Valid texels are untouched.
inline TexelAtlas dilate_atlas(const TexelAtlas& atlas, int radius = 4) {
  TexelAtlas out = atlas;
  if (radius <= 0) return out;
  for (int y = 0; y < atlas.height; ++y) {
    for (int x = 0; x < atlas.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * atlas.width + x;
      if (atlas.valid[i]) continue;
      int best_d2 = -1;
      std::size_t best = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int ny = y + dy;
        if (ny < 0 || ny >= atlas.height) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int nx = x + dx;
          if (nx < 0 || nx >= atlas.width) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * atlas.width + nx;
          if (!atlas.valid[j]) continue;
          const int d2 = dx * dx + dy * dy;
          if (best_d2 < 0 || d2 < best_d2) {
            best_d2 = d2;
            best = j;
          }
        }
      }
      if (best_d2 < 0) continue;
      out.color[i] = atlas.color[best];
      out.valid[i] = 1;
    }
  }
  return out;
}

/// Fallback parameterization: every triangle gets its own chart in a uniform
/// grid, flattened isometrically and scaled to fit its cell minus a gutter.
inline TriangleMesh auto_uv(TriangleMesh mesh, int atlas_resolution, int gutter = 2) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyInput, "auto_uv on empty mesh");
  const auto count = mesh.triangles.size();
  const auto cells = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const double cell = static_cast<double>(atlas_resolution) / static_cast<double>(cells);
  const double inner = cell - 2.0 * gutter;
  if (inner < 1.0) throw Error(ErrorCode::InvalidInput, "atlas too small for per-triangle charts");
  mesh.uvs.assign(3 * count, Vec2::Zero());
  for (std::size_t t = 0; t < count; ++t) {
    const Vec3 a = mesh.corner(t, 0), b = mesh.corner(t, 1), c = mesh.corner(t, 2);
    const Vec3 ab = b - a, ac = c - a;
    const double len = ab.norm();
    std::array<Vec2, 3> flat{Vec2::Zero(), Vec2(len, 0.0),
                             len > 0.0 ? Vec2(ac.dot(ab) / len, ab.cross(ac).norm() / len) : Vec2::Zero()};
    Vec2 lo = flat[0].cwiseMin(flat[1]).cwiseMin(flat[2]);
    Vec2 hi = flat[0].cwiseMax(flat[1]).cwiseMax(flat[2]);
    const double extent = std::max((hi - lo).maxCoeff(), 1e-300);
    const double ox = static_cast<double>(t % cells) * cell + gutter;
    const double oy = static_cast<double>(t / cells) * cell + gutter;
    for (int k = 0; k < 3; ++k) {
      const Vec2 q = (flat[k] - lo) / extent * inner;
      mesh.uvs[3 * t + k] = Vec2((ox + q.x()) / atlas_resolution, (oy + q.y()) / atlas_resolution);
    }
  }
  return mesh;
}

/// Mean absolute per-channel difference over valid texels against a reference
/// texture of the same size.
inline double atlas_mean_abs_error(const TexelAtlas& atlas, const RgbImage& reference) {
  if (reference.width != atlas.width || reference.height != atlas.height || reference.channels < 3)
    throw Error(ErrorCode::ShapeError, "reference texture does not match the atlas");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < atlas.size(); ++i) {
    if (!atlas.valid[i]) continue;
    for (int c = 0; c < 3; ++c) sum += std::abs(static_cast<double>(atlas.color[i][c]) - reference.data[i * reference.channels + c]);
    n += 3;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace scenetex
