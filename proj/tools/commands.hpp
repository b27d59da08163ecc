#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "report.hpp"
#include "scenetex/bake.hpp"
#include "scenetex/chamfer.hpp"
#include "scenetex/condition.hpp"
#include "scenetex/fixtures.hpp"
#include "scenetex/layout.hpp"
#include "scenetex/propagate.hpp"
#include "scenetex/sampling.hpp"
#include "scenetex/scene_extract.hpp"
#include "scenetex/io/config.hpp"
#include "scenetex/io/exr.hpp"
#include "scenetex/io/generator.hpp"
#include "scenetex/io/gltf.hpp"
#include "scenetex/io/obj.hpp"
#include "scenetex/io/pfm.hpp"
#include "scenetex/io/ply.hpp"
#include "scenetex/io/png.hpp"

namespace scenetex::cli {

namespace fs = std::filesystem;

inline constexpr int kManifestFormatVersion = 1;

/// Settings shared by all subcommands; read from the optional sections of a
/// `--config` manifest.
struct Settings {
  OptimConfig optim;
  RigOptions rig;
  io::BakeSettings bake;
  PlaneFitOptions planes;
  std::uint64_t seed = 0;

  void set_seed(std::uint64_t s) {
    seed = s;
    optim.seed = s;
    planes.seed = s;
  }

  json to_json() const {
    return {{"optim", io::optim_to_json(optim)},
            {"rig", io::rig_options_to_json(rig)},
            {"bake", io::bake_to_json(bake)},
            {"planes", io::planes_options_to_json(planes)}};
  }
};

inline Settings settings_from_manifest(const json& m) {
  Settings s;
  if (m.contains("optim")) s.optim = io::optim_from_json(m["optim"]);
  if (m.contains("rig")) s.rig = io::rig_options_from_json(m["rig"]);
  if (m.contains("bake")) s.bake = io::bake_from_json(m["bake"]);
  if (m.contains("planes")) s.planes = io::planes_options_from_json(m["planes"]);
  return s;
}

struct Context {
  RunReport& report;
  Settings settings;
  bool quiet = false;

  void log(const std::string& msg) const {
    if (!quiet) std::cerr << "[scenetex] " << msg << '\n';
  }
};

// ---- shared helpers ----

inline void require_file(const fs::path& p, const std::string& what) {
  if (p.empty() || !fs::is_regular_file(p)) throw Error(ErrorCode::InvalidInput, what + " not found: " + p.string());
}

/// Triangle mesh from .obj, .ply (faces required) or .gltf (all nodes with
/// their transforms applied).
inline TriangleMesh read_mesh(const fs::path& path) {
  require_file(path, "mesh");
  const auto ext = path.extension().string();
  TriangleMesh mesh;
  if (ext == ".obj") {
    mesh = io::read_obj(path).mesh;
  } else if (ext == ".ply") {
    auto data = io::read_ply(path);
    mesh.vertices = std::move(data.cloud.points);
    mesh.vertex_colors = std::move(data.cloud.colors);
    mesh.triangles = std::move(data.faces);
  } else if (ext == ".gltf") {
    for (const auto& node : io::read_gltf(path).nodes) {
      const TriangleMesh w = node.world_mesh();
      const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.insert(mesh.vertices.end(), w.vertices.begin(), w.vertices.end());
      for (auto t : w.triangles) mesh.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    }
  } else {
    throw Error(ErrorCode::InvalidInput, "unsupported mesh format: " + path.string());
  }
  if (mesh.empty()) throw Error(ErrorCode::InvalidInput, "mesh has no triangles: " + path.string());
  try {
    mesh.validate();
  } catch (const Error& e) {
    if (std::string(e.what()).find("degenerate triangle") == std::string::npos) throw;
    mesh.remove_degenerate();
    mesh.validate();
  }
  return mesh;
}

inline PointCloud read_cloud(const fs::path& path) {
  require_file(path, "point cloud");
  PointCloud c = io::read_ply_cloud(path);
  c.validate();
  return c;
}

/// Concatenation of several meshes; uvs survive only if every part has them.
inline TriangleMesh merge_meshes(const std::vector<TriangleMesh>& parts) {
  TriangleMesh out;
  bool uvs = !parts.empty();
  bool colors = !parts.empty();
  for (const auto& p : parts) {
    uvs = uvs && p.has_uvs();
    colors = colors && p.vertex_colors.size() == p.vertices.size() && !p.vertices.empty();
  }
  for (const auto& p : parts) {
    const auto base = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), p.vertices.begin(), p.vertices.end());
    for (auto t : p.triangles) out.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    if (uvs) out.uvs.insert(out.uvs.end(), p.uvs.begin(), p.uvs.end());
    if (colors) out.vertex_colors.insert(out.vertex_colors.end(), p.vertex_colors.begin(), p.vertex_colors.end());
  }
  return out;
}

inline std::string safe_name(std::string s) {
  for (auto& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s.empty() ? "unnamed" : s;
}

// ---- extract ----

struct ExtractArgs {
  fs::path camera, depth, image, out;
  std::vector<fs::path> masks;
  std::vector<std::string> labels;
  std::size_t outlier_k = 16;
  double outlier_sigma = 2.0;
};

struct ExtractedInstance {
  std::string name;
  PointCloud cloud;
};

inline std::vector<ExtractedInstance> run_extract(Context& ctx, const ExtractArgs& a) {
  StageTimer timer(ctx.report, "extract");
  if (!a.labels.empty() && a.labels.size() != a.masks.size())
    throw Error(ErrorCode::InvalidInput, "give one label per mask or none");
  const PinholeCamera cam = io::load_camera(a.camera);
  const DepthMap depth = io::load_depth(a.depth);
  std::optional<RgbImage> colors;
  if (!a.image.empty()) colors = io::read_rgb(a.image);
  const Pointmap pm = depth_to_pointmap(cam, depth, colors ? &*colors : nullptr);
  fs::create_directories(a.out);
  io::write_ply(a.out / "scene.ply", pm.cloud);
  ctx.report.output(a.out / "scene.ply");
  ctx.report.metrics()["scene_points"] = pm.cloud.size();

  std::vector<ExtractedInstance> out;
  for (std::size_t i = 0; i < a.masks.size(); ++i) {
    const std::string name = a.labels.empty() ? "instance_" + std::to_string(i) : a.labels[i];
    const Mask mask = io::read_mask(a.masks[i]);
    Pointmap inst;
    try {
      inst = segment_instance(pm, mask);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyInstance) throw;
      ctx.report.skip(name, e.what());
      ctx.log("skipping " + name + ": " + e.what());
      continue;
    }
    const auto filtered = remove_outliers(inst.cloud, a.outlier_k, a.outlier_sigma);
    const auto path = a.out / ("instance_" + safe_name(name) + ".ply");
    io::write_ply(path, filtered.cloud);
    ctx.report.output(path);
    ctx.report.instance({{"name", name},
                         {"status", "extracted"},
                         {"points", filtered.cloud.size()},
                         {"outliers_removed", inst.cloud.size() - filtered.cloud.size()},
                         {"file", path.string()}});
    out.push_back({name, filtered.cloud});
  }
  return out;
}

// ---- optimize ----

struct OptimizeJob {
  std::string name;
  PointCloud target;
  fs::path mesh_path;
  fs::path cloud_path;
};

struct OptimizeArgs {
  fs::path camera, out;
  std::vector<fs::path> instances, meshes;
  std::vector<std::string> names;
  std::size_t samples = 8192;
  int epochs = 0;  // 0 keeps the configured schedule
  int iters = 0;
};

inline OptimConfig effective_optim(const Settings& s, int epochs, int iters) {
  if (epochs <= 0 && iters <= 0) return s.optim;
  return s.optim.scaled(epochs > 0 ? epochs : s.optim.epochs, iters > 0 ? iters : s.optim.iters_per_epoch);
}

/// Optimizes every job, writing trace_<name>.json and poses.json to `out`.
inline json run_optimize(Context& ctx, const PinholeCamera& cam, const std::vector<OptimizeJob>& jobs,
                         const OptimConfig& cfg, std::size_t samples, const fs::path& out) {
  StageTimer timer(ctx.report, "optimize");
  cfg.validate();
  fs::create_directories(out);
  ctx.report.config()["optim"] = io::optim_to_json(cfg);
  json entries = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& job = jobs[i];
    json entry = {{"name", job.name}, {"mesh", fs::absolute(job.mesh_path).string()}};
    if (!job.cloud_path.empty()) entry["cloud"] = fs::absolute(job.cloud_path).string();
    if (job.target.size() < kMinInstancePoints) {
      const std::string reason = "instance has " + std::to_string(job.target.size()) + " points, fewer than " +
                                 std::to_string(kMinInstancePoints);
      entry["status"] = "skipped";
      entry["reason"] = reason;
      ctx.report.skip(job.name, reason);
      ctx.report.instance(entry);
      entries.push_back(entry);
      ctx.log("skipping " + job.name + ": " + reason);
      continue;
    }
    const TriangleMesh mesh = read_mesh(job.mesh_path);
    const PointCloud source = sample_surface(mesh, samples, cfg.seed + i);
    ctx.log("optimizing " + job.name + " (" + std::to_string(job.target.size()) + " target points)");
    const OptimResult res = optimize_pose(source, job.target, cam, cfg);
    const auto& best = res.trace.epochs[res.trace.best_epoch];
    const auto trace_path = out / ("trace_" + safe_name(job.name) + ".json");
    io::save_json(trace_path, io::trace_to_json(res.trace));
    ctx.report.output(trace_path);
    entry["status"] = "optimized";
    entry["pose"] = io::pose_to_json(res.pose);
    entry["loss"] = best.loss;
    entry["chamfer3d"] = best.chamfer3d;
    entry["chamfer2d"] = best.chamfer2d;
    entry["initial_loss"] = res.trace.initial_loss;
    entry["best_epoch"] = res.trace.best_epoch;
    json report_entry = entry;
    json epoch_losses = json::array();
    for (const auto& e : res.trace.epochs) epoch_losses.push_back(e.loss);
    report_entry["epoch_losses"] = epoch_losses;
    ctx.report.instance(report_entry);
    entries.push_back(entry);
  }
  const json poses = {{"format_version", 1}, {"instances", entries}};
  io::save_json(out / "poses.json", poses);
  ctx.report.output(out / "poses.json");
  return poses;
}

inline void cmd_optimize(Context& ctx, const OptimizeArgs& a) {
  if (a.instances.empty()) throw Error(ErrorCode::InvalidInput, "no instance clouds given");
  if (a.instances.size() != a.meshes.size()) throw Error(ErrorCode::InvalidInput, "give one mesh per instance cloud");
  if (!a.names.empty() && a.names.size() != a.instances.size())
    throw Error(ErrorCode::InvalidInput, "give one name per instance or none");
  if (a.samples < 1) throw Error(ErrorCode::InvalidInput, "--samples must be >= 1");
  const PinholeCamera cam = io::load_camera(a.camera);
  std::vector<OptimizeJob> jobs;
  for (std::size_t i = 0; i < a.instances.size(); ++i) {
    require_file(a.meshes[i], "mesh");
    jobs.push_back({a.names.empty() ? a.instances[i].stem().string() : a.names[i], read_cloud(a.instances[i]), a.meshes[i],
                    a.instances[i]});
  }
  ctx.report.input("camera", a.camera.string());
  run_optimize(ctx, cam, jobs, effective_optim(ctx.settings, a.epochs, a.iters), a.samples, a.out);
}

// ---- background ----

struct BackgroundArgs {
  fs::path camera, depth, mask, image, out;
  int resolution = 64;
};

struct BackgroundResult {
  std::vector<Plane> planes;
  TriangleMesh mesh;  // all plane meshes, world space
};

inline BackgroundResult run_background(Context& ctx, const PointCloud& cloud, int resolution, const fs::path& out) {
  StageTimer timer(ctx.report, "background");
  fs::create_directories(out);
  ctx.report.config()["planes"] = io::planes_options_to_json(ctx.settings.planes);
  BackgroundResult res;
  res.planes = fit_planes(cloud, ctx.settings.planes);
  if (res.planes.empty()) throw Error(ErrorCode::DegenerateCloud, "no supporting plane found in the background cloud");
  std::vector<TriangleMesh> parts;
  json planes = json::array();
  for (std::size_t k = 0; k < res.planes.size(); ++k) {
    const PointCloud inliers = cloud.subset(res.planes[k].inliers);
    TriangleMesh m = plane_to_mesh(res.planes[k], inliers, resolution);
    const auto path = out / ("plane_" + std::to_string(k) + ".obj");
    io::write_obj(path, m);
    ctx.report.output(path);
    json pj = io::plane_to_json(res.planes[k]);
    pj["mesh"] = path.filename().string();
    planes.push_back(pj);
    parts.push_back(std::move(m));
  }
  res.mesh = merge_meshes(parts);
  io::write_obj(out / "background.obj", res.mesh);
  io::save_json(out / "planes.json", {{"format_version", 1}, {"planes", planes}});
  io::save_json(out / "background_pose.json", io::pose_to_json(PoseParams::identity()));
  for (const char* f : {"background.obj", "planes.json", "background_pose.json"}) ctx.report.output(out / f);
  ctx.report.metrics()["planes"] = res.planes.size();
  return res;
}

inline void cmd_background(Context& ctx, const BackgroundArgs& a) {
  const PinholeCamera cam = io::load_camera(a.camera);
  const DepthMap depth = io::load_depth(a.depth);
  std::optional<RgbImage> colors;
  if (!a.image.empty()) colors = io::read_rgb(a.image);
  Pointmap pm = depth_to_pointmap(cam, depth, colors ? &*colors : nullptr);
  if (!a.mask.empty()) pm = segment_instance(pm, io::read_mask(a.mask));
  if (a.resolution < 2) throw Error(ErrorCode::InvalidInput, "--resolution must be >= 2");
  run_background(ctx, pm.cloud, a.resolution, a.out);
}

// ---- assemble ----

struct AssembleArgs {
  fs::path poses, background, background_pose, out;
  std::vector<fs::path> meshes;
};

inline SceneGraph run_assemble(Context& ctx, const json& poses, const std::vector<fs::path>& mesh_override,
                               const std::optional<std::pair<TriangleMesh, PoseParams>>& background, const fs::path& out) {
  StageTimer timer(ctx.report, "assemble");
  const auto& entries = poses.at("instances");
  if (!mesh_override.empty() && mesh_override.size() != entries.size())
    throw Error(ErrorCode::InvalidInput, "give one mesh per poses.json instance or none");
  std::vector<std::pair<TriangleMesh, PoseParams>> instances;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string name = e.value("name", "instance_" + std::to_string(i));
    if (e.value("status", std::string("optimized")) != "optimized") {
      ctx.report.skip(name, e.value("reason", std::string("not optimized")));
      continue;
    }
    const fs::path mesh_path = mesh_override.empty() ? fs::path(e.at("mesh").get<std::string>()) : mesh_override[i];
    instances.emplace_back(read_mesh(mesh_path), io::pose_from_json(e.at("pose")));
    names.push_back(name);
  }
  SceneGraph scene = assemble_scene(instances, background);
  for (std::size_t i = 0; i < names.size(); ++i) scene.nodes[i].name = names[i];
  fs::create_directories(out);
  io::write_gltf(out / "scene.gltf", scene);
  std::vector<TriangleMesh> world;
  for (const auto& n : scene.nodes) world.push_back(n.world_mesh());
  io::write_obj(out / "scene.obj", merge_meshes(world));
  ctx.report.output(out / "scene.gltf");
  ctx.report.output(out / "scene.obj");
  ctx.report.metrics()["scene_nodes"] = scene.nodes.size();
  return scene;
}

inline void cmd_assemble(Context& ctx, const AssembleArgs& a) {
  require_file(a.poses, "poses file");
  const json poses = io::load_json(a.poses);
  std::optional<std::pair<TriangleMesh, PoseParams>> bg;
  if (!a.background.empty()) {
    PoseParams pose;
    if (!a.background_pose.empty()) pose = io::pose_from_json(io::load_json(a.background_pose));
    bg.emplace(read_mesh(a.background), pose);
  }
  io::parse_guard("poses", [&] {
    run_assemble(ctx, poses, a.meshes, bg, a.out);
    return 0;
  });
}

// ---- condition ----

struct ConditionArgs {
  fs::path mesh, out;
  bool exr = false;
};

inline void cmd_condition(Context& ctx, const ConditionArgs& a) {
  StageTimer timer(ctx.report, "condition");
  const TriangleMesh mesh = read_mesh(a.mesh);
  const ViewRig rig = rig_for_mesh(mesh, ctx.settings.rig);
  ctx.report.config()["rig"] = io::rig_options_to_json(ctx.settings.rig);
  fs::create_directories(a.out);
  RasterOptions raster;
  raster.smooth_normals = ctx.settings.bake.smooth_normals;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto cond = render_condition(mesh, rig.views[i].camera, raster, ctx.settings.bake.edge_threshold);
    const auto dir = a.out / ("view_" + std::to_string(i) + "_" + rig.views[i].name);
    io::write_condition(dir, cond, a.exr);
    ctx.report.output(dir);
  }
  io::save_json(a.out / "rig.json", io::rig_to_json(rig));
  ctx.report.output(a.out / "rig.json");
}

// ---- propagate ----

struct GeneratorSpec {
  std::string command;
  fs::path oracle;  // textured mesh with a map_Kd texture
  double timeout_s = 600.0;
  int retries = 1;
};

inline json generator_to_json(const GeneratorSpec& g) {
  if (!g.oracle.empty()) return {{"oracle", g.oracle.string()}};
  return {{"command", g.command}, {"timeout_s", g.timeout_s}, {"retries", g.retries}};
}

inline ViewOptions view_options(const Settings& s) {
  ViewOptions v;
  v.raster.smooth_normals = s.bake.smooth_normals;
  v.edge_threshold = s.bake.edge_threshold;
  return v;
}

inline ConfidenceOptions confidence_options(const Settings& s) {
  return {s.bake.alpha_deg, s.bake.binary_confidence ? ConfidenceMode::Binary : ConfidenceMode::Cosine};
}

inline std::string view_file(std::size_t i) { return "view_" + std::to_string(i) + ".png"; }

/// Runs the view-by-view generation loop, saving view_<i>.png and views.json
/// into `out`. With `resume`, consecutive existing view images are reused.
inline KnownViewSet run_propagate(Context& ctx, const TriangleMesh& mesh, const GeneratorSpec& gen,
                                  const std::string& prompt, bool resume, bool write_packets, const fs::path& out) {
  StageTimer timer(ctx.report, "propagate");
  const ViewRig rig = rig_for_mesh(mesh, ctx.settings.rig);
  ctx.report.config()["rig"] = io::rig_options_to_json(ctx.settings.rig);
  ctx.report.config()["generator"] = generator_to_json(gen);
  fs::create_directories(out);

  std::unique_ptr<ExternalGenerator> generator;
  if (!gen.oracle.empty()) {
    require_file(gen.oracle, "oracle mesh");
    const auto data = io::read_obj(gen.oracle);
    if (!data.texture) throw Error(ErrorCode::InvalidInput, "oracle mesh has no map_Kd texture: " + gen.oracle.string());
    require_file(*data.texture, "oracle texture");
    generator = std::make_unique<OracleGenerator>(data.mesh, io::read_rgb(*data.texture), view_options(ctx.settings).raster);
  } else {
    if (gen.command.empty()) throw Error(ErrorCode::InvalidInput, "no generator command or oracle given");
    generator = std::make_unique<io::ProcessGenerator>(
        out / "packets", io::ProcessGeneratorOptions{gen.command, io::generator_timeout_from_env(gen.timeout_s), gen.retries});
  }

  std::vector<RgbImage> prior;
  if (resume) {
    for (std::size_t i = 0; i < rig.size() && fs::exists(out / view_file(i)); ++i) prior.push_back(io::read_rgb(out / view_file(i)));
    if (!prior.empty()) ctx.log("resuming after " + std::to_string(prior.size()) + " existing views");
  }

  PropagationOptions opt;
  opt.prompt = prompt;
  opt.visibility.depth_tol = ctx.settings.bake.depth_tol;
  opt.confidence = confidence_options(ctx.settings);
  opt.view = view_options(ctx.settings);
  if (write_packets && !gen.oracle.empty())
    opt.on_packet = [&](const PropagationPacket& p) { io::write_packet(out / "packets" / ("packet_" + std::to_string(p.index)), p); };
  const std::size_t reused = prior.size();
  opt.on_view = [&](std::size_t i, const KnownView& v) {
    if (i >= reused) io::write_rgb(out / view_file(i), v.image);
    ctx.report.output(out / view_file(i));
    ctx.log("view " + std::to_string(i + 1) + "/" + std::to_string(rig.size()) + " (" + v.name + ")");
  };
  KnownViewSet known = propagation_loop(mesh, rig, *generator, opt, prior);

  json views = json::array();
  for (std::size_t i = 0; i < rig.size(); ++i)
    views.push_back({{"name", rig.views[i].name},
                     {"weight", rig.views[i].weight},
                     {"camera", io::camera_to_json(rig.views[i].camera)},
                     {"image", view_file(i)}});
  io::save_json(out / "views.json", {{"format_version", 1}, {"views", views}});
  ctx.report.output(out / "views.json");
  ctx.report.metrics()["views"] = rig.size();
  ctx.report.metrics()["views_reused"] = reused;
  return known;
}

struct PropagateArgs {
  fs::path mesh, out;
  GeneratorSpec generator;
  std::string prompt;
  bool resume = false;
  bool write_packets = false;
};

inline void cmd_propagate(Context& ctx, const PropagateArgs& a) {
  const TriangleMesh mesh = read_mesh(a.mesh);
  run_propagate(ctx, mesh, a.generator, a.prompt, a.resume, a.write_packets, a.out);
}

// ---- bake ----

struct BakeArgs {
  fs::path mesh, views, out, reference;
};

/// Bakes `views` onto `mesh` (uvs generated if missing) and writes atlas.png,
/// atlas.exr (R, G, B, A = validity), validity.png and textured.obj. The error
/// against `reference`, if given, covers the texels valid before dilation.
inline TexelAtlas run_bake(Context& ctx, TriangleMesh mesh, const KnownViewSet& views, const fs::path& reference,
                           const fs::path& out) {
  StageTimer timer(ctx.report, "bake");
  const auto& b = ctx.settings.bake;
  ctx.report.config()["bake"] = io::bake_to_json(b);
  if (!mesh.has_uvs()) {
    ctx.report.warn("mesh has no uvs; using per-triangle charts");
    mesh = auto_uv(std::move(mesh), b.resolution);
  }
  std::vector<ConfidenceMap> confs;
  for (const auto& v : views) confs.push_back(view_confidence(v.gbuffer, v.camera, v.edges, v.weight, confidence_options(ctx.settings)));
  const TexelAtlas atlas = bake(mesh, views, confs, b.resolution, b.resolution, BakeOptions{b.depth_tol});
  ctx.report.metrics()["valid_texels"] = atlas.valid_count();
  std::size_t chart_texels = 0;
  const UvRaster uvr = rasterize_uv(mesh, b.resolution, b.resolution);
  for (auto t : uvr.triangle) chart_texels += t >= 0;
  ctx.report.metrics()["chart_texels"] = chart_texels;
  ctx.report.metrics()["texel_coverage"] = chart_texels ? static_cast<double>(atlas.valid_count()) / static_cast<double>(chart_texels) : 0.0;
  if (!reference.empty()) {
    require_file(reference, "reference texture");
    ctx.report.metrics()["atlas_mae"] = atlas_mean_abs_error(atlas, io::read_rgb(reference));
  }
  const TexelAtlas final_atlas = dilate_atlas(atlas, b.dilate);
  fs::create_directories(out);
  const RgbImage img = final_atlas.image();
  io::write_rgb(out / "atlas.png", img);
  io::write_mask(out / "validity.png", atlas.validity());
  FloatImage rgba(img.width, img.height, 4, 0.0f);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) rgba.data[4 * i + c] = img.data[3 * i + c];
    rgba.data[4 * i + 3] = atlas.valid[i] ? 1.0f : 0.0f;
  }
  io::write_exr(out / "atlas.exr", rgba, {"R", "G", "B", "A"});
  io::write_obj(out / "textured.obj", mesh, "atlas.png");
  for (const char* f : {"atlas.png", "validity.png", "atlas.exr", "textured.obj", "textured.mtl"}) ctx.report.output(out / f);
  return atlas;
}

inline KnownViewSet load_views(const Settings& s, const TriangleMesh& mesh, const fs::path& views_json) {
  require_file(views_json, "views file");
  const json j = io::load_json(views_json);
  return io::parse_guard("views", [&] {
    KnownViewSet views;
    for (const auto& v : j.at("views")) {
      const fs::path img = views_json.parent_path() / v.at("image").get<std::string>();
      require_file(img, "view image");
      views.push_back(make_known_view(mesh, io::camera_from_json(v.at("camera")), io::read_rgb(img), v.value("weight", 1.0),
                                      v.value("name", std::string{}), view_options(s)));
    }
    if (views.empty()) throw Error(ErrorCode::InvalidInput, "views file lists no views");
    return views;
  });
}

inline void cmd_bake(Context& ctx, const BakeArgs& a) {
  TriangleMesh mesh = read_mesh(a.mesh);
  const fs::path views_json = fs::is_directory(a.views) ? a.views / "views.json" : a.views;
  const KnownViewSet views = load_views(ctx.settings, mesh, views_json);
  run_bake(ctx, std::move(mesh), views, a.reference, a.out);
}

// ---- eval ----

struct EvalArgs {
  fs::path a, b;
  double tau = 0.02;
};

inline void cmd_eval(Context& ctx, const EvalArgs& a) {
  StageTimer timer(ctx.report, "eval");
  const PointCloud ca = read_cloud(a.a), cb = read_cloud(a.b);
  if (ca.empty() || cb.empty()) throw Error(ErrorCode::EmptyInput, "eval needs two non-empty clouds");
  ctx.report.input("a", a.a.string());
  ctx.report.input("b", a.b.string());
  ctx.report.metrics()["chamfer3d"] = chamfer3d(ca, cb);
  ctx.report.metrics()["fscore"] = fscore(ca, cb, a.tau);
  ctx.report.metrics()["tau"] = a.tau;
  ctx.report.metrics()["points_a"] = ca.size();
  ctx.report.metrics()["points_b"] = cb.size();
}

// ---- pipeline ----

struct Manifest {
  fs::path base;
  json doc;

  fs::path path(const json& j, const char* key) const {
    const fs::path p = j.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
  }
};

/// Checks version, section shapes and that every referenced file exists.
inline Manifest load_manifest(const fs::path& file) {
  require_file(file, "manifest");
  Manifest m{fs::absolute(file).parent_path(), io::load_json(file)};
  io::parse_guard("manifest", [&] {
    const auto& d = m.doc;
    io::detail::reject_unknown(d, {"format_version", "output_dir", "seed", "scene", "texture", "optim", "rig", "bake", "planes", "hooks"},
                               "manifest");
    if (d.value("format_version", 0) != kManifestFormatVersion)
      throw Error(ErrorCode::InvalidInput, "unsupported manifest format_version (expected 1)");
    if (!d.contains("scene") && !d.contains("texture"))
      throw Error(ErrorCode::InvalidInput, "manifest needs a scene or texture section");
    if (d.contains("scene")) {
      const auto& s = d["scene"];
      io::detail::reject_unknown(s, {"camera", "depth", "image", "instances", "background", "samples", "outlier_k", "outlier_sigma"},
                                 "scene");
      require_file(m.path(s, "camera"), "camera");
      require_file(m.path(s, "depth"), "depth");
      if (s.contains("image")) require_file(m.path(s, "image"), "image");
      for (const auto& inst : s.value("instances", json::array())) {
        io::detail::reject_unknown(inst, {"name", "mask", "mesh"}, "scene instance");
        require_file(m.path(inst, "mask"), "instance mask");
        require_file(m.path(inst, "mesh"), "instance mesh");
      }
      if (s.contains("background")) {
        io::detail::reject_unknown(s["background"], {"depth", "mask", "resolution"}, "scene background");
        if (s["background"].contains("depth")) require_file(m.path(s["background"], "depth"), "background depth");
        if (s["background"].contains("mask")) require_file(m.path(s["background"], "mask"), "background mask");
      }
    }
    if (d.contains("texture")) {
      const auto& t = d["texture"];
      io::detail::reject_unknown(t, {"mesh", "prompt", "generator", "reference", "resume", "write_packets"}, "texture");
      require_file(m.path(t, "mesh"), "texture mesh");
      const auto& g = t.at("generator");
      io::detail::reject_unknown(g, {"command", "oracle", "timeout_s", "retries"}, "generator");
      if (g.contains("oracle"))
        require_file(m.path(g, "oracle"), "oracle mesh");
      else if (!g.contains("command"))
        throw Error(ErrorCode::InvalidInput, "generator needs a command or an oracle");
      if (t.contains("reference")) require_file(m.path(t, "reference"), "reference texture");
    }
    if (d.contains("hooks")) io::detail::reject_unknown(d["hooks"], {"preprocess_views", "materials", "timeout_s"}, "hooks");
    return 0;
  });
  return m;
}

inline void run_hook(Context& ctx, const json& hooks, const char* name, const fs::path& dir) {
  if (!hooks.contains(name) || hooks[name].is_null()) return;
  StageTimer timer(ctx.report, std::string("hook_") + name);
  const std::string cmd = hooks[name].get<std::string>();
  const std::string err = io::run_command(cmd, dir, hooks.value("timeout_s", 600.0));
  if (!err.empty()) throw Error(ErrorCode::GeneratorFailure, std::string("hook ") + name + " failed: " + err);
}

inline fs::path pipeline_output_dir(const Manifest& m) {
  const fs::path p = m.doc.value("output_dir", std::string("out"));
  return p.is_absolute() ? p : m.base / p;
}

inline void cmd_pipeline(Context& ctx, const Manifest& m) {
  const auto& d = m.doc;
  const fs::path out = pipeline_output_dir(m);
  const json hooks = d.value("hooks", json::object());
  ctx.report.config() = ctx.settings.to_json();

  if (d.contains("scene")) {
    const auto& s = d["scene"];
    const fs::path scene_out = out / "scene";
    ExtractArgs ea;
    ea.camera = m.path(s, "camera");
    ea.depth = m.path(s, "depth");
    if (s.contains("image")) ea.image = m.path(s, "image");
    ea.out = scene_out / "extract";
    ea.outlier_k = s.value("outlier_k", std::size_t{16});
    ea.outlier_sigma = s.value("outlier_sigma", 2.0);
    std::vector<fs::path> mesh_paths;
    for (const auto& inst : s.value("instances", json::array())) {
      ea.masks.push_back(m.path(inst, "mask"));
      ea.labels.push_back(inst.value("name", "instance_" + std::to_string(ea.labels.size())));
      mesh_paths.push_back(m.path(inst, "mesh"));
    }
    const auto extracted = run_extract(ctx, ea);
    std::vector<OptimizeJob> jobs;
    for (const auto& e : extracted) {
      const auto it = std::find(ea.labels.begin(), ea.labels.end(), e.name);
      jobs.push_back({e.name, e.cloud, mesh_paths[static_cast<std::size_t>(it - ea.labels.begin())], {}});
    }
    const PinholeCamera cam = io::load_camera(ea.camera);
    const json poses = run_optimize(ctx, cam, jobs, ctx.settings.optim, s.value("samples", std::size_t{8192}), scene_out / "optimize");

    std::optional<std::pair<TriangleMesh, PoseParams>> bg;
    if (s.contains("background")) {
      const auto& b = s["background"];
      const DepthMap depth = io::load_depth(b.contains("depth") ? m.path(b, "depth") : ea.depth);
      Pointmap pm = depth_to_pointmap(cam, depth);
      if (b.contains("mask")) pm = segment_instance(pm, io::read_mask(m.path(b, "mask")));
      const auto res = run_background(ctx, pm.cloud, b.value("resolution", 64), scene_out / "background");
      bg.emplace(res.mesh, PoseParams::identity());
    }
    run_assemble(ctx, poses, {}, bg, scene_out);
  }

  if (d.contains("texture")) {
    const auto& t = d["texture"];
    const fs::path tex_out = out / "texture";
    const TriangleMesh mesh = read_mesh(m.path(t, "mesh"));
    GeneratorSpec gen;
    const auto& g = t["generator"];
    if (g.contains("oracle")) gen.oracle = m.path(g, "oracle");
    gen.command = g.value("command", std::string{});
    gen.timeout_s = g.value("timeout_s", 600.0);
    gen.retries = g.value("retries", 1);
    const fs::path views_dir = tex_out / "views";
    KnownViewSet views = run_propagate(ctx, mesh, gen, t.value("prompt", std::string{}), t.value("resume", false),
                                       t.value("write_packets", false), views_dir);
    if (hooks.contains("preprocess_views") && !hooks["preprocess_views"].is_null()) {
      run_hook(ctx, hooks, "preprocess_views", views_dir);
      views = load_views(ctx.settings, mesh, views_dir / "views.json");
    }
    run_bake(ctx, mesh, views, t.contains("reference") ? m.path(t, "reference") : fs::path{}, tex_out / "bake");
    run_hook(ctx, hooks, "materials", tex_out / "bake");
  }
}

// ---- fixtures ----

struct FixtureArgs {
  std::string kind;
  fs::path out;
  int resolution = 1024;
};

inline PoseParams synthetic_ground_truth() {
  PoseParams p;
  p.translation = Vec3(0.15, -0.1, 0.25);
  p.rotation = Vec3(0.12, 0.35, -0.18);
  p.log_scale = std::log(1.15);
  return p;
}

inline PinholeCamera synthetic_camera() {
  return look_at(Vec3(0.4, 1.2, -2.6), Vec3(0.0, -0.1, 0.2), Vec3::UnitY(), 500.0, 500.0, 320.0, 240.0, 640, 480);
}

inline void cmd_fixture(Context& ctx, const FixtureArgs& a) {
  fs::create_directories(a.out);
  if (a.kind == "cube") {
    if (a.resolution < 16) throw Error(ErrorCode::InvalidInput, "--resolution must be >= 16");
    io::write_rgb(a.out / "checker.png", fixtures::checker_texture(a.resolution));
    io::write_obj(a.out / "cube.obj", fixtures::cube(), "checker.png");
    const json manifest = {{"format_version", kManifestFormatVersion},
                           {"output_dir", "out"},
                           {"seed", 0},
                           {"texture",
                            {{"mesh", "cube.obj"},
                             {"prompt", "checkered cube"},
                             {"generator", {{"oracle", "cube.obj"}}},
                             {"reference", "checker.png"}}},
                           {"bake", {{"resolution", a.resolution}}}};
    io::save_json(a.out / "manifest.json", manifest);
    for (const char* f : {"checker.png", "cube.obj", "cube.mtl", "manifest.json"}) ctx.report.output(a.out / f);
  } else if (a.kind == "synthetic") {
    const TriangleMesh blob = fixtures::blob();
    const PoseParams gt = synthetic_ground_truth();
    const PinholeCamera cam = synthetic_camera();
    io::write_obj(a.out / "blob.obj", blob);
    io::save_json(a.out / "camera.json", io::camera_to_json(cam));
    io::save_json(a.out / "pose_gt.json", io::pose_to_json(gt));
    // Full-surface samples of the posed asset: the exact-recovery target.
    io::write_ply(a.out / "instance.ply", apply_pose(gt, sample_surface(blob, 2048, 1234)));

    // Depth render of the posed asset on a floor with a back wall.
    TriangleMesh room;
    room.vertices = {{-3, -0.6, -1}, {3, -0.6, -1}, {3, -0.6, 3}, {-3, -0.6, 3}, {-3, -0.6, 3}, {3, -0.6, 3}, {3, 2.5, 3}, {-3, 2.5, 3}};
    room.triangles = {{0, 2, 1}, {0, 3, 2}, {4, 6, 5}, {4, 7, 6}};
    const TriangleMesh posed = apply_pose(gt, blob);
    const TriangleMesh scene = merge_meshes({posed, room});
    const GBuffer g = rasterize(scene, cam);
    DepthMap depth(g.width, g.height, 0.0f);
    Mask blob_mask(g.width, g.height, 1, 0), bg_mask(g.width, g.height, 1, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.covered(i)) continue;
      depth.depth[i] = static_cast<float>(g.depth[i]);
      (static_cast<std::size_t>(g.triangle[i]) < posed.triangles.size() ? blob_mask : bg_mask).data[i] = 1;
    }
    io::save_depth(a.out / "depth.pfm", depth);
    io::write_mask(a.out / "blob_mask.png", blob_mask);
    io::write_mask(a.out / "background_mask.png", bg_mask);
    const json manifest = {{"format_version", kManifestFormatVersion},
                           {"output_dir", "out"},
                           {"seed", 0},
                           {"scene",
                            {{"camera", "camera.json"},
                             {"depth", "depth.pfm"},
                             {"instances", json::array({{{"name", "blob"}, {"mask", "blob_mask.png"}, {"mesh", "blob.obj"}}})},
                             {"background", {{"mask", "background_mask.png"}}}}},
                           {"optim", {{"epochs", 5}, {"iters_per_epoch", 400}, {"warmup_3d_iters", 240}}}};
    io::save_json(a.out / "manifest.json", manifest);
    for (const char* f : {"blob.obj", "camera.json", "pose_gt.json", "instance.ply", "depth.pfm", "blob_mask.png",
                          "background_mask.png", "manifest.json"})
      ctx.report.output(a.out / f);
  } else {
    throw Error(ErrorCode::InvalidInput, "unknown fixture '" + a.kind + "' (cube or synthetic)");
  }
}

}  // namespace scenetex::cli
