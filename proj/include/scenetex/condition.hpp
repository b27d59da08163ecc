#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"
#include "scenetex/raster.hpp"

namespace scenetex {

inline constexpr int kConditionChannels = 7;
inline constexpr std::array<const char*, kConditionChannels> kConditionChannelNames{
    "normal_x", "normal_y", "normal_z", "position_x", "position_y", "position_z", "edge"};

/// H x W x 7 conditioning stack: normal mapped by (n+1)/2, position
/// normalized by the mesh bounds, binary edge. Empty pixels are all zero.
struct ConditionTensor {
  FloatImage data;  // 7 channels
  Vec3 bounds_min = Vec3::Zero();
  double bounds_scale = 1.0;  // largest AABB extent

  int width() const { return data.width; }
  int height() const { return data.height; }
};

/// Positions are normalized with one scale for all axes (the largest extent of
/// the bounding box) so every view shares the same encoding and aspect ratio.
inline ConditionTensor pack_condition(const GBuffer& g, const Mask& edges, const Aabb& bounds) {
  if (edges.width != g.width || edges.height != g.height) throw Error(ErrorCode::ShapeError, "edge map size mismatch");
  const double scale = bounds.empty() ? 0.0 : bounds.extent().maxCoeff();
  if (!(scale > 1e-12) || !std::isfinite(scale) || !bounds.min.allFinite())
    throw Error(ErrorCode::DegenerateBounds, "mesh bounding box is degenerate");
  ConditionTensor out;
  out.data = FloatImage(g.width, g.height, kConditionChannels, 0.0f);
  out.bounds_min = bounds.min;
  out.bounds_scale = scale;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      if (!g.covered(i)) continue;
      const Vec3 n = 0.5 * (g.normal[i] + Vec3::Ones());
      const Vec3 p = (g.position[i] - bounds.min) / scale;
      for (int c = 0; c < 3; ++c) {
        out.data.at(x, y, c) = static_cast<float>(std::clamp(n(c), 0.0, 1.0));
        out.data.at(x, y, 3 + c) = static_cast<float>(std::clamp(p(c), 0.0, 1.0));
      }
      out.data.at(x, y, 6) = edges.data[i] ? 1.0f : 0.0f;
    }
  }
  return out;
}

struct RigView {
  PinholeCamera camera;
  double weight = 1.0;
  std::string name;
};

struct ViewRig {
  std::vector<RigView> views;

  std::size_t size() const { return views.size(); }

  void validate() const {
    if (views.empty()) throw Error(ErrorCode::InvalidInput, "view rig is empty");
    for (const auto& v : views)
      if (!(v.weight > 0.0)) throw Error(ErrorCode::InvalidInput, "view weights must be positive");
  }
};

struct RigOptions {
  Vec3 center = Vec3::Zero();
  int resolution = 768;
  double fov_deg = 40.0;
  double principal_weight = 1.0;
  double oblique_weight = 0.1;
  std::array<double, 4> oblique_azimuth_deg{45.0, 135.0, 225.0, 325.0};
  std::array<double, 4> oblique_elevation_deg{-20.0, 20.0, -20.0, 20.0};
};

/// World direction from the target toward a camera at the given azimuth
/// (about +Y, measured from +Z toward +X) and elevation (toward +Y).
inline Vec3 orbit_direction(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  return Vec3(std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az));
}

/// Ten-view rig: six axis-aligned principal views and four oblique views, all
/// looking at `opt.center` from distance `radius`. World up is +Y.
inline ViewRig default_rig(double radius, const RigOptions& opt = {}) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidInput, "rig radius must be positive");
  const double f = 0.5 * opt.resolution / std::tan(0.5 * opt.fov_deg * std::numbers::pi / 180.0);
  const double c = 0.5 * opt.resolution;
  auto make = [&](const Vec3& dir, const Vec3& up) {
    return look_at(opt.center + radius * dir, opt.center, up, f, f, c, c, opt.resolution, opt.resolution);
  };
  ViewRig rig;
  const std::array<std::pair<const char*, Vec3>, 6> principal{{{"front", Vec3::UnitZ()},
                                                               {"right", Vec3::UnitX()},
                                                               {"back", -Vec3::UnitZ()},
                                                               {"left", -Vec3::UnitX()},
                                                               {"top", Vec3::UnitY()},
                                                               {"bottom", -Vec3::UnitY()}}};
  for (const auto& [name, dir] : principal) {
    const Vec3 up = std::abs(dir.y()) > 0.5 ? Vec3(-dir.y() * Vec3::UnitZ()) : Vec3(Vec3::UnitY());
    rig.views.push_back({make(dir, up), opt.principal_weight, name});
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const Vec3 dir = orbit_direction(opt.oblique_azimuth_deg[k], opt.oblique_elevation_deg[k]);
    rig.views.push_back({make(dir, Vec3::UnitY()), opt.oblique_weight,
                         "oblique_az" + std::to_string(static_cast<int>(opt.oblique_azimuth_deg[k])) + "_el" +
                             std::to_string(static_cast<int>(opt.oblique_elevation_deg[k]))});
  }
  return rig;
}

/// Default rig framing a mesh: centered on its bounding box, far enough that
/// the bounding sphere fits the field of view with a small margin.
inline ViewRig rig_for_mesh(const TriangleMesh& mesh, RigOptions opt = {}, double margin = 1.1) {
  const Aabb box = mesh.bounds();
  if (box.empty() || !(box.diagonal() > 0.0)) throw Error(ErrorCode::DegenerateBounds, "mesh bounding box is degenerate");
  opt.center = box.center();
  const double half_fov = 0.5 * opt.fov_deg * std::numbers::pi / 180.0;
  return default_rig(margin * 0.5 * box.diagonal() / std::sin(half_fov), opt);
}

/// Render the conditioning stack of one view.
inline ConditionTensor render_condition(const TriangleMesh& mesh, const PinholeCamera& cam,
                                        const RasterOptions& raster = {}, double edge_threshold = 0.05) {
  const GBuffer g = rasterize(mesh, cam, raster);
  return pack_condition(g, edge_map(g, edge_threshold), mesh.bounds());
}

}  // namespace scenetex
