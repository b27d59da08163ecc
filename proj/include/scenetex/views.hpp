#pragma once

#include <string>
#include <vector>

#include "scenetex/geometry.hpp"
#include "scenetex/image.hpp"
#include "scenetex/raster.hpp"

namespace scenetex {

/// One generated view with its render of the mesh.
struct KnownView {
  PinholeCamera camera;
  RgbImage image;
  GBuffer gbuffer;
  Mask edges;
  double weight = 1.0;  // prior weight of the view
  std::string name;
};

/// Views in generation order.
using KnownViewSet = std::vector<KnownView>;

struct ViewOptions {
  RasterOptions raster;
  double edge_threshold = 0.05;
};

inline KnownView make_known_view(const TriangleMesh& mesh, const PinholeCamera& cam, RgbImage image, double weight,
                                 std::string name = {}, const ViewOptions& opt = {}) {
  if (image.width != cam.width() || image.height != cam.height() || image.channels != 3)
    throw Error(ErrorCode::InvalidInput, "view image does not match the camera resolution or is not RGB");
  KnownView v{cam, std::move(image), rasterize(mesh, cam, opt.raster), {}, weight, std::move(name)};
  v.edges = edge_map(v.gbuffer, opt.edge_threshold);
  return v;
}

}  // namespace scenetex
