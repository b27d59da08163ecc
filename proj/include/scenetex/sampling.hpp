#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"

namespace scenetex {

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform random subset of at most `max_points` points; input order is kept.
inline PointCloud subsample(const PointCloud& cloud, std::size_t max_points, std::uint64_t seed,
                            std::uint64_t stream = 0) {
  if (cloud.size() <= max_points) return cloud;
  std::vector<std::size_t> all(cloud.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(max_points);
  auto rng = make_rng(seed, stream);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), max_points, rng);
  return cloud.subset(picked);
}

/// Area-weighted uniform samples on the mesh surface. Colors are interpolated
/// from vertex colors when present.
inline PointCloud sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed) {
  if (mesh.empty()) throw Error(ErrorCode::EmptyInput, "cannot sample an empty mesh");
  std::vector<double> cdf(mesh.triangles.size());
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    total += mesh.area(t);
    cdf[t] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateCloud, "mesh has zero surface area");

  auto rng = make_rng(seed, 0x5eed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const bool colored = mesh.vertex_colors.size() == mesh.vertices.size();
  PointCloud out;
  out.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = uniform(rng) * total;
    const auto t = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::lower_bound(cdf.begin(), cdf.end(), pick) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(cdf.size()) - 1));
    double r1 = uniform(rng), r2 = uniform(rng);
    if (r1 + r2 > 1.0) {
      r1 = 1.0 - r1;
      r2 = 1.0 - r2;
    }
    const double r0 = 1.0 - r1 - r2;
    const auto& tri = mesh.triangles[t];
    out.points.push_back(r0 * mesh.vertices[tri[0]] + r1 * mesh.vertices[tri[1]] + r2 * mesh.vertices[tri[2]]);
    if (colored)
      out.colors.push_back(r0 * mesh.vertex_colors[tri[0]] + r1 * mesh.vertex_colors[tri[1]] +
                           r2 * mesh.vertex_colors[tri[2]]);
  }
  return out;
}

}  // namespace scenetex
