#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "scenetex/fixtures.hpp"
#include "scenetex/io/config.hpp"
#include "scenetex/io/ply.hpp"
#include "scenetex/io/png.hpp"

using namespace scenetex;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kCli = SCENETEX_CLI_PATH;

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("scenetex_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, EvalIdenticalCloudsIsPerfect) {
  const auto dir = scratch("eval");
  io::write_ply(dir / "a.ply", sample_surface(fixtures::blob(2), 500, 3));
  ASSERT_EQ(run("eval " + quoted(dir / "a.ply") + " " + quoted(dir / "a.ply") + " --report " + quoted(dir / "r.json")), 0);
  const auto r = io::load_json(dir / "r.json");
  EXPECT_EQ(r["status"], "ok");
  EXPECT_EQ(r["metrics"]["chamfer3d"].get<double>(), 0.0);
  EXPECT_EQ(r["metrics"]["fscore"].get<double>(), 100.0);
}

TEST(Cli, SyntheticFixtureOptimizeWithinTolerance) {
  const auto dir = scratch("synthetic");
  ASSERT_EQ(run("fixture synthetic --out " + quoted(dir / "fx")), 0);
  ASSERT_EQ(run("optimize --camera " + quoted(dir / "fx/camera.json") + " --instance " + quoted(dir / "fx/instance.ply") +
                " --mesh " + quoted(dir / "fx/blob.obj") + " --name blob --epochs 5 --iters 400 --out " +
                quoted(dir / "opt")),
            0);
  const auto gt = io::pose_from_json(io::load_json(dir / "fx/pose_gt.json"));
  const auto poses = io::load_json(dir / "opt/poses.json");
  ASSERT_EQ(poses["instances"].size(), 1u);
  const auto got = io::pose_from_json(poses["instances"][0]["pose"]);
  EXPECT_LT((got.translation - gt.translation).norm(), 1e-2);
  const Mat3 dr = got.rotation_matrix().transpose() * gt.rotation_matrix();
  EXPECT_LT(Eigen::AngleAxisd(dr).angle() * 180.0 / M_PI, 3.0);
  EXPECT_NEAR(got.scale(), gt.scale(), 0.02 * gt.scale());
  EXPECT_TRUE(fs::exists(dir / "opt/trace_blob.json"));
  const auto report = io::load_json(dir / "opt/report.json");
  EXPECT_EQ(report["config"]["optim"]["warmup_3d_iters"], 240);
}

TEST(Cli, InvalidInputExitsTwo) {
  const auto dir = scratch("invalid");
  EXPECT_EQ(run("optimize --camera " + quoted(dir / "nope.json") + " --instance a.ply --mesh b.obj --out " +
                quoted(dir / "o")),
            2);
  const auto r = io::load_json(dir / "o/report.json");
  EXPECT_EQ(r["status"], "error");
  EXPECT_EQ(r["exit_code"], 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("eval only_one.ply"), 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run("pipeline --config " + quoted(dir / "bad.json")), 2);
}

TEST(Cli, FailingGeneratorExitsThree) {
  const auto dir = scratch("generator");
  ASSERT_EQ(run("fixture cube --resolution 64 --out " + quoted(dir / "fx")), 0);
  EXPECT_EQ(run("propagate --mesh " + quoted(dir / "fx/cube.obj") + " --generator \"exit 1\" --retries 0 --out " +
                quoted(dir / "views")),
            3);
  const auto r = io::load_json(dir / "views/report.json");
  EXPECT_EQ(r["error"]["code"], "GeneratorFailure");
  EXPECT_EQ(r["exit_code"], 3);
}

TEST(Cli, CubePipelineIsDeterministic) {
  const auto dir = scratch("pipeline");
  ASSERT_EQ(run("fixture cube --resolution 256 --out " + quoted(dir / "fx")), 0);
  auto manifest = io::load_json(dir / "fx/manifest.json");
  manifest["rig"] = {{"resolution", 192}};
  manifest["bake"] = {{"resolution", 256}};
  for (const char* out : {"run1", "run2"}) {
    manifest["output_dir"] = (dir / out).string();
    io::save_json(dir / "fx/m.json", manifest);
    ASSERT_EQ(run("pipeline --config " + quoted(dir / "fx/m.json")), 0) << out;
  }
  const auto r = io::load_json(dir / "run1/report.json");
  EXPECT_EQ(r["status"], "ok");
  EXPECT_LT(r["metrics"]["atlas_mae"].get<double>(), 0.05);
  for (const char* f : {"texture/bake/atlas.png", "texture/bake/validity.png", "texture/views/view_3.png",
                        "texture/views/views.json"}) {
    ASSERT_TRUE(fs::exists(dir / "run1" / f)) << f;
    EXPECT_EQ(slurp(dir / "run1" / f), slurp(dir / "run2" / f)) << f;
  }
}
