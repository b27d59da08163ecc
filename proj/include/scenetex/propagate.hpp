#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scenetex/bake.hpp"
#include "scenetex/condition.hpp"
#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"
#include "scenetex/raster.hpp"
#include "scenetex/views.hpp"

namespace scenetex {

struct VisibilityOptions {
  double depth_tol = 1e-3;     // relative to depth
  bool exclude_edges = true;   // target edge pixels count as unknown
};

/// Target view render shared by mask construction and projection.
struct TargetRender {
  GBuffer gbuffer;
  Mask edges;
};

inline TargetRender render_target(const TriangleMesh& mesh, const PinholeCamera& target, const ViewOptions& opt = {}) {
  TargetRender r{rasterize(mesh, target, opt.raster), {}};
  r.edges = edge_map(r.gbuffer, opt.edge_threshold);
  return r;
}

/// Known-region mask of a target view: 1 where the surface seen by the target
/// pixel is also the visible surface in at least one known view. Uncovered
/// pixels are 0.
inline Mask visibility_mask(const TriangleMesh& mesh, const TargetRender& target, const KnownViewSet& known,
                            const VisibilityOptions& opt = {}) {
  const GBuffer& g = target.gbuffer;
  Mask m(g.width, g.height, 1, 0);
  if (known.empty()) return m;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.covered(i)) continue;
    if (opt.exclude_edges && target.edges.data[i]) continue;
    for (const auto& view : known) {
      if (visible_in_view(mesh, view.camera, view.gbuffer, g.position[i], g.triangle[i], opt.depth_tol)) {
        m.data[i] = 1;
        break;
      }
    }
  }
  return m;
}

inline Mask visibility_mask(const TriangleMesh& mesh, const PinholeCamera& target, const KnownViewSet& known,
                            const VisibilityOptions& opt = {}, const ViewOptions& view_opt = {}) {
  return visibility_mask(mesh, render_target(mesh, target, view_opt), known, opt);
}

/// Known texture reprojected into the target view. Each pixel of `mask` gets
/// the confidence-weighted mean of bilinear samples from the known views that
/// see it (plain mean if every such view has zero confidence there); all
/// other pixels are black.
inline RgbImage project_known(const TriangleMesh& mesh, const TargetRender& target, const Mask& mask,
                              const KnownViewSet& known, const VisibilityOptions& opt = {},
                              const ConfidenceOptions& conf_opt = {}) {
  const GBuffer& g = target.gbuffer;
  RgbImage out(g.width, g.height, 3, 0.0f);
  if (known.empty()) return out;
  std::vector<ConfidenceMap> confs;
  confs.reserve(known.size());
  for (const auto& v : known) confs.push_back(view_confidence(v.gbuffer, v.camera, v.edges, v.weight, conf_opt));

  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!mask.data[i] || !g.covered(i)) continue;
    double weighted[3] = {0, 0, 0}, plain[3] = {0, 0, 0};
    double total = 0.0;
    int hits = 0;
    for (std::size_t v = 0; v < known.size(); ++v) {
      const auto hit = visible_in_view(mesh, known[v].camera, known[v].gbuffer, g.position[i], g.triangle[i], opt.depth_tol);
      if (!hit) continue;
      float rgb[3];
      sample_bilinear(known[v].image, hit->pixel.x(), hit->pixel.y(), rgb);
      const double w = confs[v].value[hit->index];
      for (int c = 0; c < 3; ++c) {
        weighted[c] += w * rgb[c];
        plain[c] += rgb[c];
      }
      total += w;
      ++hits;
    }
    if (hits == 0) continue;
    for (int c = 0; c < 3; ++c)
      out.data[3 * i + c] = static_cast<float>(total > 0.0 ? weighted[c] / total : plain[c] / hits);
  }
  return out;
}

inline RgbImage project_known(const TriangleMesh& mesh, const PinholeCamera& target, const KnownViewSet& known,
                              const VisibilityOptions& opt = {}, const ConfidenceOptions& conf_opt = {},
                              const ViewOptions& view_opt = {}) {
  const auto render = render_target(mesh, target, view_opt);
  return project_known(mesh, render, visibility_mask(mesh, render, known, opt), known, opt, conf_opt);
}

/// Everything an external generator receives for one view. The first view of
/// a sequence carries no partial image or mask.
struct PropagationPacket {
  std::size_t index = 0;
  RigView view;
  std::optional<RgbImage> partial;
  std::optional<Mask> mask;  // 1 = known, 0 = to be generated
  ConditionTensor condition;
  std::string prompt;
};

/// Produces a full RGB image for a packet. Implementations report failure by
/// throwing Error(GeneratorFailure).
class ExternalGenerator {
 public:
  virtual ~ExternalGenerator() = default;
  virtual RgbImage generate(const PropagationPacket& packet) = 0;
};

/// Renders a textured mesh with bilinear texture lookup; empty pixels are black.
inline RgbImage render_textured(const TriangleMesh& mesh, const RgbImage& texture, const PinholeCamera& cam,
                                const RasterOptions& raster = {}) {
  if (!mesh.has_uvs()) throw Error(ErrorCode::MissingUVs, "textured render needs uvs");
  const GBuffer g = rasterize(mesh, cam, raster);
  RgbImage out(g.width, g.height, 3, 0.0f);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.covered(i)) continue;
    const auto t = static_cast<std::size_t>(g.triangle[i]);
    const Vec3& b = g.barycentric[i];
    const Vec2 uv = b(0) * mesh.uv(t, 0) + b(1) * mesh.uv(t, 1) + b(2) * mesh.uv(t, 2);
    sample_bilinear(texture, uv.x() * texture.width, uv.y() * texture.height, &out.data[3 * i]);
  }
  return out;
}

/// Test generator: returns renders of a ground-truth textured mesh.
class OracleGenerator : public ExternalGenerator {
 public:
  OracleGenerator(TriangleMesh mesh, RgbImage texture, RasterOptions raster = {})
      : mesh_(std::move(mesh)), texture_(std::move(texture)), raster_(raster) {}

  RgbImage generate(const PropagationPacket& packet) override {
    return render_textured(mesh_, texture_, packet.view.camera, raster_);
  }

 private:
  TriangleMesh mesh_;
  RgbImage texture_;
  RasterOptions raster_;
};

struct PropagationOptions {
  std::string prompt;
  VisibilityOptions visibility;
  ConfidenceOptions confidence;
  ViewOptions view;
  std::function<void(const PropagationPacket&)> on_packet;
  std::function<void(std::size_t, const KnownView&)> on_view;
};

/// Packet for rig view `index` given the views generated so far.
inline PropagationPacket make_packet(const TriangleMesh& mesh, const ViewRig& rig, std::size_t index,
                                     const KnownViewSet& known, const PropagationOptions& opt) {
  const RigView& view = rig.views.at(index);
  const TargetRender render = render_target(mesh, view.camera, opt.view);
  PropagationPacket packet;
  packet.index = index;
  packet.view = view;
  packet.prompt = opt.prompt;
  packet.condition = pack_condition(render.gbuffer, render.edges, mesh.bounds());
  if (index > 0) {
    packet.mask = visibility_mask(mesh, render, known, opt.visibility);
    packet.partial = project_known(mesh, render, *packet.mask, known, opt.visibility, opt.confidence);
  }
  return packet;
}

/// View-by-view generation: the first view is generated from its conditioning
/// alone, each later view from a packet holding the known texture projected
/// from all earlier views. `prior` supplies already generated images (resume);
/// those views skip the generator but their packets are rebuilt identically.
inline KnownViewSet propagation_loop(const TriangleMesh& mesh, const ViewRig& rig, ExternalGenerator& generator,
                                     const PropagationOptions& opt = {}, const std::vector<RgbImage>& prior = {}) {
  rig.validate();
  KnownViewSet known;
  known.reserve(rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const PropagationPacket packet = make_packet(mesh, rig, i, known, opt);
    if (opt.on_packet) opt.on_packet(packet);
    RgbImage image = i < prior.size() ? prior[i] : generator.generate(packet);
    const auto& cam = rig.views[i].camera;
    if (image.width != cam.width() || image.height != cam.height() || image.channels != 3)
      throw Error(ErrorCode::GeneratorFailure, "generated image for view " + std::to_string(i) + " has the wrong size");
    known.push_back(make_known_view(mesh, cam, std::move(image), rig.views[i].weight, rig.views[i].name, opt.view));
    if (opt.on_view) opt.on_view(i, known.back());
  }
  return known;
}

}  // namespace scenetex
