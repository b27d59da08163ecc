#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenetex/bake.hpp"
#include "scenetex/condition.hpp"
#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/layout.hpp"
#include "scenetex/scene_extract.hpp"
#include "scenetex/io/exr.hpp"
#include "scenetex/io/pfm.hpp"

namespace scenetex::io {

using nlohmann::json;

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidInput, where + " must be a JSON object");
  const std::set<std::string> names(known.begin(), known.end());
  for (const auto& [key, value] : j.items())
    if (!names.count(key)) throw Error(ErrorCode::InvalidInput, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidInput, "expected an array of 3 numbers");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, path.string() + ": " + e.what());
  }
}

inline void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

// Wraps JSON type errors so callers see InvalidInput.
template <typename F>
auto parse_guard(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidInput, where + ": " + e.what());
  }
}

// ---- camera ----

inline json camera_to_json(const PinholeCamera& cam) {
  json m = json::array();
  const Mat4 w = cam.world_from_camera();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(w(r, c));
  return {{"fx", cam.fx()}, {"fy", cam.fy()}, {"cx", cam.cx()}, {"cy", cam.cy()},
          {"width", cam.width()}, {"height", cam.height()}, {"world_from_camera", m}};
}

inline PinholeCamera camera_from_json(const json& j) {
  return parse_guard("camera", [&] {
    detail::reject_unknown(j, {"fx", "fy", "cx", "cy", "width", "height", "world_from_camera"}, "camera");
    const auto& m = j.at("world_from_camera");
    if (!m.is_array() || m.size() != 16) throw Error(ErrorCode::InvalidInput, "world_from_camera needs 16 numbers");
    Mat4 w;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) w(r, c) = m[static_cast<std::size_t>(4 * r + c)].get<double>();
    return PinholeCamera(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                         j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>(), w);
  });
}

inline PinholeCamera load_camera(const std::filesystem::path& path) { return camera_from_json(load_json(path)); }

// ---- pose ----

inline json pose_to_json(const PoseParams& p) {
  json m = json::array();
  const Mat4 mat = p.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m.push_back(mat(r, c));
  return {{"translation", detail::vec3_to(p.translation)},
          {"rotation", detail::vec3_to(p.rotation)},
          {"log_scale", p.log_scale},
          {"scale", p.scale()},
          {"matrix", m}};
}

/// Reads translation / axis-angle rotation / log_scale (or scale); the
/// derived "matrix" entry is ignored.
inline PoseParams pose_from_json(const json& j) {
  return parse_guard("pose", [&] {
    detail::reject_unknown(j, {"translation", "rotation", "log_scale", "scale", "matrix"}, "pose");
    PoseParams p;
    if (j.contains("translation")) p.translation = detail::vec3_from(j["translation"]);
    if (j.contains("rotation")) p.rotation = detail::vec3_from(j["rotation"]);
    if (j.contains("log_scale")) {
      p.log_scale = j["log_scale"].get<double>();
    } else if (j.contains("scale")) {
      const double s = j["scale"].get<double>();
      if (!(s > 0.0)) throw Error(ErrorCode::InvalidInput, "pose scale must be positive");
      p.log_scale = std::log(s);
    }
    if (!p.finite()) throw Error(ErrorCode::InvalidInput, "non-finite pose");
    return p;
  });
}

// ---- optimizer ----

inline json optim_to_json(const OptimConfig& c) {
  return {{"lambda3d", c.lambda3d},           {"lambda2d", c.lambda2d},
          {"epochs", c.epochs},               {"iters_per_epoch", c.iters_per_epoch},
          {"warmup_3d_iters", c.warmup_3d_iters}, {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},   {"max_points", c.max_points},
          {"seed", c.seed},                   {"record_iterations", c.record_iterations}};
}

/// Missing keys keep their defaults.
inline OptimConfig optim_from_json(const json& j, OptimConfig c = {}) {
  return parse_guard("optim", [&] {
    detail::reject_unknown(j,
                           {"lambda3d", "lambda2d", "epochs", "iters_per_epoch", "warmup_3d_iters", "learning_rate",
                            "adam_beta1", "adam_beta2", "adam_epsilon", "max_points", "seed", "record_iterations"},
                           "optim");
    detail::read_opt(j, "lambda3d", c.lambda3d);
    detail::read_opt(j, "lambda2d", c.lambda2d);
    detail::read_opt(j, "epochs", c.epochs);
    detail::read_opt(j, "iters_per_epoch", c.iters_per_epoch);
    detail::read_opt(j, "warmup_3d_iters", c.warmup_3d_iters);
    detail::read_opt(j, "learning_rate", c.learning_rate);
    detail::read_opt(j, "adam_beta1", c.adam_beta1);
    detail::read_opt(j, "adam_beta2", c.adam_beta2);
    detail::read_opt(j, "adam_epsilon", c.adam_epsilon);
    detail::read_opt(j, "max_points", c.max_points);
    detail::read_opt(j, "seed", c.seed);
    detail::read_opt(j, "record_iterations", c.record_iterations);
    c.validate();
    return c;
  });
}

inline json trace_to_json(const OptimTrace& t) {
  json epochs = json::array();
  for (const auto& e : t.epochs)
    epochs.push_back({{"loss", e.loss}, {"chamfer3d", e.chamfer3d}, {"chamfer2d", e.chamfer2d}, {"pose", pose_to_json(e.pose)}});
  json out = {{"initial_pose", pose_to_json(t.initial_pose)},
              {"initial_loss", t.initial_loss},
              {"best_epoch", t.best_epoch},
              {"epochs", epochs}};
  if (!t.iteration_losses.empty()) out["iteration_losses"] = t.iteration_losses;
  return out;
}

// ---- rig ----

inline json rig_options_to_json(const RigOptions& o) {
  return {{"resolution", o.resolution},
          {"fov_deg", o.fov_deg},
          {"principal_weight", o.principal_weight},
          {"oblique_weight", o.oblique_weight},
          {"oblique_azimuth_deg", o.oblique_azimuth_deg},
          {"oblique_elevation_deg", o.oblique_elevation_deg}};
}

inline RigOptions rig_options_from_json(const json& j, RigOptions o = {}) {
  return parse_guard("rig", [&] {
    detail::reject_unknown(j,
                           {"resolution", "fov_deg", "principal_weight", "oblique_weight", "oblique_azimuth_deg",
                            "oblique_elevation_deg"},
                           "rig");
    detail::read_opt(j, "resolution", o.resolution);
    detail::read_opt(j, "fov_deg", o.fov_deg);
    detail::read_opt(j, "principal_weight", o.principal_weight);
    detail::read_opt(j, "oblique_weight", o.oblique_weight);
    detail::read_opt(j, "oblique_azimuth_deg", o.oblique_azimuth_deg);
    detail::read_opt(j, "oblique_elevation_deg", o.oblique_elevation_deg);
    if (o.resolution < 1 || !(o.fov_deg > 0.0 && o.fov_deg < 180.0))
      throw Error(ErrorCode::InvalidInput, "rig resolution must be >= 1 and fov in (0, 180)");
    return o;
  });
}

inline json rig_to_json(const ViewRig& rig) {
  json views = json::array();
  for (const auto& v : rig.views) views.push_back({{"name", v.name}, {"weight", v.weight}, {"camera", camera_to_json(v.camera)}});
  return {{"views", views}};
}

inline ViewRig rig_from_json(const json& j) {
  return parse_guard("views", [&] {
    ViewRig rig;
    for (const auto& v : j.at("views"))
      rig.views.push_back({camera_from_json(v.at("camera")), v.value("weight", 1.0), v.value("name", std::string{})});
    rig.validate();
    return rig;
  });
}

// ---- baking ----

struct BakeSettings {
  int resolution = 1024;
  int dilate = 4;  // 0 disables seam dilation
  double depth_tol = 1e-3;
  double alpha_deg = 60.0;
  bool binary_confidence = false;
  double edge_threshold = 0.05;
  bool smooth_normals = false;
};

inline json bake_to_json(const BakeSettings& b) {
  return {{"resolution", b.resolution},       {"dilate", b.dilate},
          {"depth_tol", b.depth_tol},         {"alpha_deg", b.alpha_deg},
          {"binary_confidence", b.binary_confidence}, {"edge_threshold", b.edge_threshold},
          {"smooth_normals", b.smooth_normals}};
}

inline BakeSettings bake_from_json(const json& j, BakeSettings b = {}) {
  return parse_guard("bake", [&] {
    detail::reject_unknown(
        j, {"resolution", "dilate", "depth_tol", "alpha_deg", "binary_confidence", "edge_threshold", "smooth_normals"},
        "bake");
    detail::read_opt(j, "resolution", b.resolution);
    detail::read_opt(j, "dilate", b.dilate);
    detail::read_opt(j, "depth_tol", b.depth_tol);
    detail::read_opt(j, "alpha_deg", b.alpha_deg);
    detail::read_opt(j, "binary_confidence", b.binary_confidence);
    detail::read_opt(j, "edge_threshold", b.edge_threshold);
    detail::read_opt(j, "smooth_normals", b.smooth_normals);
    if (b.resolution < 1 || b.dilate < 0 || !(b.depth_tol > 0.0) || !(b.alpha_deg > 0.0 && b.alpha_deg <= 90.0))
      throw Error(ErrorCode::InvalidInput, "invalid bake settings");
    return b;
  });
}

// ---- planes ----

inline json planes_options_to_json(const PlaneFitOptions& o) {
  return {{"max_planes", o.max_planes}, {"inlier_tol", o.inlier_tol}, {"min_inliers", o.min_inliers},
          {"iterations", o.iterations}, {"seed", o.seed}};
}

inline PlaneFitOptions planes_options_from_json(const json& j, PlaneFitOptions o = {}) {
  return parse_guard("planes", [&] {
    detail::reject_unknown(j, {"max_planes", "inlier_tol", "min_inliers", "iterations", "seed"}, "planes");
    detail::read_opt(j, "max_planes", o.max_planes);
    detail::read_opt(j, "inlier_tol", o.inlier_tol);
    detail::read_opt(j, "min_inliers", o.min_inliers);
    detail::read_opt(j, "iterations", o.iterations);
    detail::read_opt(j, "seed", o.seed);
    return o;
  });
}

inline json plane_to_json(const Plane& p) {
  return {{"normal", detail::vec3_to(p.normal)}, {"offset", p.offset}, {"inliers", p.inliers.size()}};
}

// ---- depth ----

/// Depth from a single-channel (or first-channel) PFM, or from an EXR channel
/// named Z, Y or R, in that order of preference.
inline DepthMap load_depth(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  DepthMap d;
  if (ext == ".pfm" || ext == ".PFM") {
    const FloatImage img = read_pfm(path);
    d.width = img.width;
    d.height = img.height;
    d.depth.resize(img.pixel_count());
    for (std::size_t i = 0; i < d.depth.size(); ++i) d.depth[i] = img.data[i * img.channels];
  } else if (ext == ".exr" || ext == ".EXR") {
    const ExrImage img = read_exr(path);
    int ch = -1;
    for (const char* name : {"Z", "Y", "R"})
      if ((ch = img.channel(name)) >= 0) break;
    if (ch < 0) throw Error(ErrorCode::InvalidInput, path.string() + " has no Z, Y or R channel");
    d.width = img.data.width;
    d.height = img.data.height;
    d.depth.resize(img.data.pixel_count());
    for (std::size_t i = 0; i < d.depth.size(); ++i) d.depth[i] = img.data.data[i * img.data.channels + ch];
  } else {
    throw Error(ErrorCode::InvalidInput, "depth must be .pfm or .exr: " + path.string());
  }
  return d;
}

inline void save_depth(const std::filesystem::path& path, const DepthMap& d) {
  FloatImage img(d.width, d.height, 1, 0.0f);
  img.data = d.depth;
  write_pfm(path, img);
}

}  // namespace scenetex::io
