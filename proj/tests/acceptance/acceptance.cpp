// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "oracles.hpp"
#include "scenetex/bake.hpp"
#include "scenetex/chamfer.hpp"
#include "scenetex/condition.hpp"
#include "scenetex/fixtures.hpp"
#include "scenetex/io/config.hpp"
#include "scenetex/layout.hpp"
#include "scenetex/propagate.hpp"
#include "scenetex/scene_extract.hpp"

using namespace scenetex;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double rel_err(double got, double want) {
  if (got == want) return 0.0;
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

// ---- config fidelity ----

Outcome config_fidelity() {
  const OptimConfig c;
  const RigOptions r;
  const ConfidenceOptions conf;
  const auto rig = default_rig(1.0);
  bool ok = c.lambda3d == 1.0 && c.lambda2d == 5e-2 && c.epochs == 20 && c.iters_per_epoch == 2000 &&
            c.warmup_3d_iters == 1200 && c.learning_rate == 0.01;
  ok = ok && rig.size() == 10 && r.principal_weight == 1.0 && r.oblique_weight == 0.1;
  for (std::size_t i = 0; i < rig.size(); ++i) ok = ok && rig.views[i].weight == (i < 6 ? 1.0 : 0.1);
  ok = ok && conf.alpha_deg == 60.0;
  return {ok, fmt("lambda=(%g,%g) schedule=%dx%d warmup=%d lr=%g views=%zu alpha=%g", c.lambda3d, c.lambda2d, c.epochs,
                  c.iters_per_epoch, c.warmup_3d_iters, c.learning_rate, rig.size(), conf.alpha_deg)};
}

// ---- chamfer and nearest neighbour vs brute force ----

Outcome chamfer_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> size(1, 1000);
  const auto cam = look_at(Vec3(0.3, -0.2, -3.0), Vec3::Zero(), Vec3::UnitY(), 400, 400, 320, 240, 640, 480);
  double worst = 0.0;
  int nn_mismatch = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const auto a = oracle::random_points(rng, static_cast<std::size_t>(size(rng)));
    const auto b = oracle::random_points(rng, static_cast<std::size_t>(size(rng)), -0.8, 1.2);
    worst = std::max(worst, rel_err(chamfer3d(a, b), oracle::brute_chamfer(a, b)));
    const auto pa = oracle::brute_project(cam, a), pb = oracle::brute_project(cam, b);
    if (!pa.empty() && !pb.empty()) worst = std::max(worst, rel_err(chamfer2d(cam, a, b), oracle::brute_chamfer(pa, pb)));
    const auto index = make_index(b);
    for (std::size_t q = 0; q < a.size(); q += 7) {
      const auto got = index.nearest(to_array(a[q]));
      const auto want = oracle::brute_nearest(b, a[q]);
      if (got.index != want.first || rel_err(got.sq_dist, want.second) > 1e-10) ++nn_mismatch;
    }
  }
  const double t = seconds_since(start);
  return {worst < 1e-10 && nn_mismatch == 0 && t < 30.0,
          fmt("200 instances, max rel err %.2e, nn mismatches %d, %.1f s", worst, nn_mismatch, t)};
}

// ---- analytic gradient vs central differences ----

Outcome gradient_check() {
  // The loss is piecewise smooth in the pose; an instance whose stencil
  // crosses a nearest-neighbour switch is not a valid check point and is
  // redrawn (the count is reported).
  const auto start = Clock::now();
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> size(50, 300);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto cam = look_at(Vec3(0.2, -0.3, -3.0), Vec3::Zero(), Vec3::UnitY(), 400, 400, 160, 120, 320, 240);
  const double h = 1e-5;
  double worst = 0.0;
  int checked = 0, redrawn = 0;
  while (checked < 50 && redrawn < 500) {
    const auto src = oracle::random_points(rng, static_cast<std::size_t>(size(rng)), -0.5, 0.5);
    const auto tgt = oracle::random_points(rng, static_cast<std::size_t>(size(rng)), -0.6, 0.6);
    PoseParams pose;
    pose.translation = 0.1 * Vec3(n(rng), n(rng), n(rng));
    pose.rotation = 0.3 * Vec3(n(rng), n(rng), n(rng));
    pose.log_scale = 0.1 * n(rng);
    const bool use2d = checked % 5 != 4;
    if (!oracle::smooth_on_stencil(pose, src, tgt, cam, use2d, h)) {
      ++redrawn;
      continue;
    }
    const ChamferObjective obj(src, tgt, cam);
    const double l3 = 1.0, l2 = 5e-2;
    const auto g = obj.evaluate(pose, l3, l2, use2d).grad.to_vector();
    const auto fd = oracle::central_difference(
        [&](const Eigen::Matrix<double, 7, 1>& x) {
          return obj.evaluate(PoseParams::from_vector(x), l3, l2, use2d, false).loss;
        },
        pose.to_vector(), h);
    for (int k = 0; k < 7; ++k) worst = std::max(worst, std::abs(g(k) - fd(k)) / std::max(std::abs(fd(k)), 1e-300));
    ++checked;
  }
  const double t = seconds_since(start);
  return {checked == 50 && worst < 1e-4 && t < 60.0,
          fmt("%d instances (%d redrawn at a nearest-neighbour switch), max per-component rel err %.2e, %.1f s", checked,
              redrawn, worst, t)};
}

// ---- synthetic pose recovery and ablation ----

struct Trial {
  PointCloud source, target;
  PoseParams gt;
};

Trial make_trial(const TriangleMesh& mesh, std::uint64_t seed) {
  auto rng = make_rng(seed, 77);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Trial t;
  t.source = sample_surface(mesh, 2048, seed);
  const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
  t.gt.translation = 0.5 * std::cbrt(u(rng)) * dir;
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  t.gt.rotation = (30.0 * u(rng) * M_PI / 180.0) * axis;
  t.gt.log_scale = std::log(0.8) + u(rng) * (std::log(1.25) - std::log(0.8));
  t.target = apply_pose(t.gt, t.source);
  return t;
}

PinholeCamera trial_camera() {
  return look_at(Vec3(0.4, 1.2, -2.6), Vec3(0, -0.1, 0.2), Vec3::UnitY(), 500, 500, 320, 240, 640, 480);
}

struct AblationResult {
  std::vector<double> joint, only3d, only2d;
  int recovered = 0;
  double recovery_seconds = 0.0;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

AblationResult run_recovery_suite() {
  const auto mesh = fixtures::blob(4);
  const auto cam = trial_camera();
  const OptimConfig joint = OptimConfig{}.scaled(5, 400);
  OptimConfig only3d = joint;
  only3d.lambda2d = 0.0;
  OptimConfig only2d = joint;
  only2d.lambda3d = 0.0;
  only2d.warmup_3d_iters = 0;

  AblationResult r;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto trial = make_trial(mesh, 5000 + s);
    auto final_cd = [&](const OptimConfig& cfg) {
      return chamfer3d(apply_pose(optimize_pose(trial.source, trial.target, cam, cfg).pose, trial.source), trial.target);
    };
    const auto start = Clock::now();
    const auto res = optimize_pose(trial.source, trial.target, cam, joint);
    const double cd = chamfer3d(apply_pose(res.pose, trial.source), trial.target);
    r.recovery_seconds += seconds_since(start);
    if (cd < 1e-4 && (res.pose.translation - trial.gt.translation).norm() < 1e-2) ++r.recovered;
    r.joint.push_back(cd);
    r.only3d.push_back(final_cd(only3d));
    r.only2d.push_back(final_cd(only2d));
  }
  return r;
}

// ---- visibility vs ray casting ----

Outcome visibility_oracle() {
  const auto start = Clock::now();
  auto mesh = fixtures::icosphere(2, 0.5);
  const auto small = fixtures::icosphere(1, 0.35);
  const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const auto& v : small.vertices) mesh.vertices.push_back(v + Vec3(0.45, 0.2, -0.5));
  for (const auto& t : small.triangles) mesh.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  RigOptions opt;
  opt.resolution = 128;
  const auto rig = rig_for_mesh(mesh, opt);
  long agree = 0, total = 0;
  for (std::size_t t = 1; t < rig.size(); ++t) {
    KnownViewSet known;
    for (std::size_t k = 0; k < t; ++k)
      known.push_back(make_known_view(mesh, rig.views[k].camera, RgbImage(opt.resolution, opt.resolution, 3), 1.0));
    // Also test against a single earlier view so that partial masks occur.
    for (const KnownViewSet& set : {known, KnownViewSet{known.front()}}) {
      const auto render = render_target(mesh, rig.views[t].camera);
      const auto m = visibility_mask(mesh, render, set);
      const auto& g = render.gbuffer;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g.covered(i) || render.edges.data[i]) continue;
        bool want = false;
        for (const auto& v : set) want = want || oracle::visible(mesh, v.camera, g.position[i], 1e-3);
        agree += (m.data[i] != 0) == want;
        ++total;
      }
    }
  }
  const double frac = static_cast<double>(agree) / static_cast<double>(std::max(total, 1L));
  const double t = seconds_since(start);
  return {mesh.triangles.size() <= 500 && frac >= 0.995 && t < 60.0,
          fmt("%zu triangles, agreement %.4f over %ld pixels, %.1f s", mesh.triangles.size(), frac, total, t)};
}

// ---- bake round trip ----

Outcome bake_round_trip() {
  const auto start = Clock::now();
  const auto mesh = fixtures::cube();
  const auto tex = fixtures::checker_texture(1024);
  const auto rig = rig_for_mesh(mesh);
  OracleGenerator gen(mesh, tex);
  const auto views = propagation_loop(mesh, rig, gen);
  std::vector<ConfidenceMap> confs;
  for (const auto& v : views) confs.push_back(view_confidence(v.gbuffer, v.camera, v.edges, v.weight));
  const auto atlas = bake(mesh, views, confs, 1024, 1024);
  const double mae = atlas_mean_abs_error(atlas, tex);
  const double t = seconds_since(start);
  return {mae < 2.0 / 255.0 && t < 120.0,
          fmt("MAE %.5f (limit %.5f) over %zu valid texels, %.1f s", mae, 2.0 / 255.0, atlas.valid_count(), t)};
}

// ---- masked blend exactness ----

Outcome blend_exactness() {
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::uniform_int_distribution<int> bit(0, 1);
  long mismatches = 0, byte_mismatches = 0, checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int w = 17 + inst, h = 11 + 2 * inst, c = 1 + inst % 4;
    FloatImage known(w, h, c), random(w, h, c), soft(w, h, c);
    for (auto& v : known.data) v = u(rng);
    for (auto& v : random.data) v = u(rng);
    for (auto& v : soft.data) v = std::abs(u(rng)) / 2.0f;
    for (std::size_t i = 0; i < soft.data.size(); i += 5) soft.data[i] = static_cast<float>(bit(rng));
    const auto out = masked_blend(known, random, soft);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      const float m = soft.data[i];
      float want = known.data[i] * m + random.data[i] * (1.0f - m);
      if (m == 1.0f) want = known.data[i];
      if (m == 0.0f) want = random.data[i];
      mismatches += out.data[i] != want;
      ++checked;
    }
    Mask binary(w, h, 1);
    for (auto& v : binary.data) v = static_cast<std::uint8_t>(bit(rng));
    const auto hard = masked_blend(known, random, binary);
    for (std::size_t p = 0; p < binary.data.size(); ++p)
      for (int k = 0; k < c; ++k) {
        const std::size_t i = p * c + k;
        const float& want = binary.data[p] ? known.data[i] : random.data[i];
        byte_mismatches += std::memcmp(&hard.data[i], &want, sizeof(float)) != 0;
      }
  }
  return {mismatches == 0 && byte_mismatches == 0,
          fmt("%ld soft values, %ld mismatches, %ld byte mismatches under binary masks", checked, mismatches,
              byte_mismatches)};
}

// ---- plane fitting ----

Outcome plane_fitting() {
  int passed = 0;
  double worst_angle = 0.0, worst_offset = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = make_rng(seed, 31);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Vec3 normal = Vec3(n(rng), n(rng), n(rng)).normalized();
    const double offset = 2.0 * u(rng);
    const auto [e1, e2] = plane_basis(normal);
    PointCloud cloud;
    for (int i = 0; i < 3000; ++i)
      cloud.points.push_back(offset * normal + u(rng) * e1 + u(rng) * e2 + 0.005 * n(rng) * normal);
    PlaneFitOptions opt;
    opt.seed = seed;
    opt.inlier_tol = 0.015;
    const auto planes = fit_planes(cloud, opt);
    if (planes.empty()) continue;
    Vec3 got = planes[0].normal;
    double d = planes[0].offset;
    if (got.dot(normal) < 0.0) {
      got = -got;
      d = -d;
    }
    const double angle = std::acos(std::clamp(got.dot(normal), -1.0, 1.0)) * 180.0 / M_PI;
    worst_angle = std::max(worst_angle, angle);
    worst_offset = std::max(worst_offset, std::abs(d - offset));
    passed += angle < 1.0 && std::abs(d - offset) < 0.01;
  }
  return {passed == 20, fmt("%d/20 seeds, worst normal error %.3f deg, worst offset error %.4f", passed, worst_angle,
                            worst_offset)};
}

// ---- end-to-end pipeline through the command-line tool ----

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SCENETEX_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome pipeline_oracle() {
  const auto dir = fs::temp_directory_path() / "scenetex_acceptance_pipeline";
  fs::remove_all(dir);
  const auto start = Clock::now();
  if (run_cli("fixture cube --out \"" + (dir / "fixture").string() + "\"") != 0) return {false, "fixture failed"};
  const auto manifest = dir / "fixture" / "manifest.json";
  auto doc = io::load_json(manifest);
  doc["output_dir"] = (dir / "run").string();
  io::save_json(manifest, doc);
  const int code = run_cli("pipeline --config \"" + manifest.string() + "\"");
  const auto report_path = dir / "run" / "report.json";
  if (!fs::exists(report_path)) return {false, fmt("exit %d, no report", code)};
  const auto report = io::load_json(report_path);
  const double mae = report["metrics"].value("atlas_mae", 1.0);
  const double t = seconds_since(start);
  return {code == 0 && mae < 2.0 / 255.0, fmt("exit %d, atlas_mae %.5f (limit %.5f), %.1f s", code, mae, 2.0 / 255.0, t)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
    failures += !o.pass;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report("config-fidelity", guarded(config_fidelity));
  report("chamfer-oracle", guarded(chamfer_oracle));
  report("gradient-check", guarded(gradient_check));

  AblationResult suite;
  Outcome recovery, ablation;
  try {
    suite = run_recovery_suite();
    recovery = {suite.recovered >= 45 && suite.recovery_seconds < 300.0,
                fmt("%d/50 trials recovered (need 45), %.1f s", suite.recovered, suite.recovery_seconds)};
    const double mj = median(suite.joint), m3 = median(suite.only3d), m2 = median(suite.only2d);
    ablation = {mj <= m3 && m3 <= m2, fmt("median final CD joint %.3e, 3D-only %.3e, 2D-only %.3e", mj, m3, m2)};
  } catch (const std::exception& e) {
    recovery = ablation = {false, std::string("exception: ") + e.what()};
  }
  report("pose-recovery", recovery);
  report("ablation-order", ablation);

  report("visibility-oracle", guarded(visibility_oracle));
  report("bake-round-trip", guarded(bake_round_trip));
  report("blend-exactness", guarded(blend_exactness));
  report("plane-fitting", guarded(plane_fitting));
  report("pipeline-oracle", guarded(pipeline_oracle));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
