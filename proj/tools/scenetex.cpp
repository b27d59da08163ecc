// scenetex command-line tool: scene layout and multi-view texturing stages.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace scenetex;
using namespace scenetex::cli;

namespace {

struct Common {
  std::uint64_t seed = 0;
  fs::path config;
  fs::path report;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Seed for all random streams")->capture_default_str();
  sub->add_option("--config", c.config, "Manifest whose optim/rig/bake/planes sections override defaults");
  sub->add_option("--report", c.report, "Run-report path (default: <out>/report.json)");
  sub->add_flag("-q,--quiet", c.quiet, "Suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenetex: scene layout optimization and multi-view texture baking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  Common common;

  ExtractArgs extract;
  auto* s_extract = app.add_subcommand("extract", "Depth + camera + masks -> scene and instance point clouds");
  s_extract->add_option("--camera", extract.camera, "Camera JSON")->required();
  s_extract->add_option("--depth", extract.depth, "Depth map (.pfm or .exr)")->required();
  s_extract->add_option("--image", extract.image, "RGB image for point colors");
  s_extract->add_option("--mask", extract.masks, "Instance mask PNG (repeatable)");
  s_extract->add_option("--label", extract.labels, "Instance label, one per mask");
  s_extract->add_option("--outlier-k", extract.outlier_k, "Neighbours for outlier removal")->capture_default_str();
  s_extract->add_option("--outlier-sigma", extract.outlier_sigma, "Outlier threshold in std devs")->capture_default_str();
  s_extract->add_option("--out", extract.out, "Output directory")->required();
  add_common(s_extract, common);

  OptimizeArgs optimize;
  auto* s_opt = app.add_subcommand("optimize", "Instance clouds + meshes -> poses and optimization traces");
  s_opt->add_option("--camera", optimize.camera, "Camera JSON")->required();
  s_opt->add_option("--instance", optimize.instances, "Instance point cloud PLY (repeatable)")->required();
  s_opt->add_option("--mesh", optimize.meshes, "Asset mesh, one per instance")->required();
  s_opt->add_option("--name", optimize.names, "Instance name, one per instance");
  s_opt->add_option("--samples", optimize.samples, "Surface samples drawn from each mesh")->capture_default_str();
  s_opt->add_option("--epochs", optimize.epochs, "Override epochs (warmup keeps its share)");
  s_opt->add_option("--iters", optimize.iters, "Override iterations per epoch (warmup keeps its share)");
  s_opt->add_option("--out", optimize.out, "Output directory")->required();
  add_common(s_opt, common);

  AssembleArgs assemble;
  auto* s_asm = app.add_subcommand("assemble", "Poses + meshes -> glTF scene");
  s_asm->add_option("--poses", assemble.poses, "poses.json from optimize")->required();
  s_asm->add_option("--mesh", assemble.meshes, "Mesh override, one per poses.json instance");
  s_asm->add_option("--background", assemble.background, "Background mesh");
  s_asm->add_option("--background-pose", assemble.background_pose, "Background pose JSON (default identity)");
  s_asm->add_option("--out", assemble.out, "Output directory")->required();
  add_common(s_asm, common);

  BackgroundArgs background;
  auto* s_bg = app.add_subcommand("background", "Background depth -> plane meshes and pose");
  s_bg->add_option("--camera", background.camera, "Camera JSON")->required();
  s_bg->add_option("--depth", background.depth, "Depth map (.pfm or .exr)")->required();
  s_bg->add_option("--mask", background.mask, "Background mask PNG (default: all valid pixels)");
  s_bg->add_option("--image", background.image, "RGB image for plane colors");
  s_bg->add_option("--resolution", background.resolution, "Grid vertices per plane side")->capture_default_str();
  s_bg->add_option("--out", background.out, "Output directory")->required();
  add_common(s_bg, common);

  ConditionArgs condition;
  auto* s_cond = app.add_subcommand("condition", "Mesh + rig -> conditioning maps per view");
  s_cond->add_option("--mesh", condition.mesh, "Mesh (.obj/.ply/.gltf)")->required();
  s_cond->add_flag("--exr", condition.exr, "Also write a 7-channel EXR per view");
  s_cond->add_option("--out", condition.out, "Output directory")->required();
  add_common(s_cond, common);

  PropagateArgs propagate;
  auto* s_prop = app.add_subcommand("propagate", "Mesh + rig + generator -> generated view images");
  s_prop->add_option("--mesh", propagate.mesh, "Mesh (.obj/.ply/.gltf)")->required();
  auto* gen_cmd = s_prop->add_option("--generator", propagate.generator.command, "Generator command (run via /bin/sh)");
  auto* gen_oracle = s_prop->add_option("--oracle", propagate.generator.oracle, "Textured OBJ rendered as the generator");
  gen_cmd->excludes(gen_oracle);
  s_prop->add_option("--timeout", propagate.generator.timeout_s, "Seconds per generator attempt (env SCENETEX_GENERATOR_TIMEOUT wins)")
      ->capture_default_str();
  s_prop->add_option("--retries", propagate.generator.retries, "Extra attempts after a failure")->capture_default_str();
  s_prop->add_option("--prompt", propagate.prompt, "Text passed through to the generator");
  s_prop->add_flag("--resume", propagate.resume, "Reuse existing view images in the output directory");
  s_prop->add_flag("--write-packets", propagate.write_packets, "Write packets even for the oracle generator");
  s_prop->add_option("--out", propagate.out, "Output directory")->required();
  add_common(s_prop, common);

  BakeArgs bake_args;
  int bake_resolution = 0, bake_dilate = -1;
  auto* s_bake = app.add_subcommand("bake", "Mesh + views -> texture atlas");
  s_bake->add_option("--mesh", bake_args.mesh, "Mesh (.obj/.ply/.gltf)")->required();
  s_bake->add_option("--views", bake_args.views, "views.json or the directory holding it")->required();
  s_bake->add_option("--resolution", bake_resolution, "Atlas resolution (default 1024)");
  s_bake->add_option("--dilate", bake_dilate, "Seam dilation radius in texels (default 4)");
  s_bake->add_option("--reference", bake_args.reference, "Reference texture for the atlas error metric");
  s_bake->add_option("--out", bake_args.out, "Output directory")->required();
  add_common(s_bake, common);

  EvalArgs eval;
  auto* s_eval = app.add_subcommand("eval", "Two point clouds -> chamfer distance and F-score");
  s_eval->add_option("a", eval.a, "First PLY")->required();
  s_eval->add_option("b", eval.b, "Second PLY")->required();
  s_eval->add_option("--tau", eval.tau, "F-score distance threshold")->capture_default_str();
  add_common(s_eval, common);

  auto* s_pipe = app.add_subcommand("pipeline", "Manifest -> end-to-end scene and/or texture workflow");
  add_common(s_pipe, common);
  s_pipe->get_option("--config")->required()->description("Pipeline manifest");

  FixtureArgs fixture;
  auto* s_fix = app.add_subcommand("fixture", "Write a test fixture (cube or synthetic)");
  s_fix->add_option("kind", fixture.kind, "cube | synthetic")->required();
  s_fix->add_option("--resolution", fixture.resolution, "Checker texture resolution (cube)")->capture_default_str();
  s_fix->add_option("--out", fixture.out, "Output directory")->required();
  add_common(s_fix, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  RunReport report(sub->get_name(), common.seed);
  std::string argv_line;
  for (int i = 0; i < argc; ++i) argv_line += (i ? " " : "") + std::string(argv[i]);
  report.input("argv", argv_line);

  fs::path out_dir;
  if (sub == s_extract) out_dir = extract.out;
  if (sub == s_opt) out_dir = optimize.out;
  if (sub == s_asm) out_dir = assemble.out;
  if (sub == s_bg) out_dir = background.out;
  if (sub == s_cond) out_dir = condition.out;
  if (sub == s_prop) out_dir = propagate.out;
  if (sub == s_bake) out_dir = bake_args.out;
  if (sub == s_fix) out_dir = fixture.out;
  fs::path report_path = common.report;

  int code = 0;
  try {
    Context ctx{report, {}, common.quiet};
    std::optional<Manifest> manifest;
    if (sub == s_pipe) {
      manifest = load_manifest(common.config);
      ctx.settings = settings_from_manifest(manifest->doc);
      if (manifest->doc.contains("seed") && sub->count("--seed") == 0) common.seed = manifest->doc["seed"].get<std::uint64_t>();
      out_dir = pipeline_output_dir(*manifest);
      report.input("manifest", fs::absolute(common.config).string());
    } else if (!common.config.empty()) {
      require_file(common.config, "config");
      ctx.settings = settings_from_manifest(io::load_json(common.config));
      report.input("config", common.config.string());
    }
    ctx.settings.set_seed(common.seed);
    report.doc()["seed"] = common.seed;
    if (bake_resolution > 0) ctx.settings.bake.resolution = bake_resolution;
    if (bake_dilate >= 0) ctx.settings.bake.dilate = bake_dilate;
    if (report_path.empty() && !out_dir.empty()) report_path = out_dir / "report.json";

    if (sub == s_extract) run_extract(ctx, extract);
    if (sub == s_opt) cmd_optimize(ctx, optimize);
    if (sub == s_asm) cmd_assemble(ctx, assemble);
    if (sub == s_bg) cmd_background(ctx, background);
    if (sub == s_cond) cmd_condition(ctx, condition);
    if (sub == s_prop) {
      if (propagate.generator.command.empty() && propagate.generator.oracle.empty())
        throw Error(ErrorCode::InvalidInput, "propagate needs --generator or --oracle");
      cmd_propagate(ctx, propagate);
    }
    if (sub == s_bake) cmd_bake(ctx, bake_args);
    if (sub == s_eval) cmd_eval(ctx, eval);
    if (sub == s_pipe) cmd_pipeline(ctx, *manifest);
    if (sub == s_fix) cmd_fixture(ctx, fixture);
  } catch (const Error& e) {
    code = exit_code_for(e.code());
    report.fail(code, std::string(to_string(e.code())), e.what());
    std::cerr << "scenetex " << sub->get_name() << ": " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    code = 2;
    report.fail(code, "Io", e.what());
    std::cerr << "scenetex " << sub->get_name() << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    code = 2;
    report.fail(code, "InvalidInput", e.what());
    std::cerr << "scenetex " << sub->get_name() << ": " << e.what() << '\n';
  }

  const json& doc = report.finish();
  if (sub == s_eval) std::cout << doc["metrics"].dump() << '\n';
  if (!report_path.empty()) {
    try {
      if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
      io::save_json(report_path, doc);
    } catch (const std::exception& e) {
      std::cerr << "scenetex: cannot write report: " << e.what() << '\n';
      if (code == 0) code = 2;
    }
  }
  return code;
}
