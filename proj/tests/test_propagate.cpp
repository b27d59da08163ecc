#include <gtest/gtest.h>

#include <cstring>

#include "oracles.hpp"
#include "scenetex/fixtures.hpp"
#include "scenetex/propagate.hpp"

using namespace scenetex;

namespace {

RgbImage constant_image(const PinholeCamera& cam, float r, float g, float b) {
  RgbImage img(cam.width(), cam.height(), 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    img.data[3 * i] = r;
    img.data[3 * i + 1] = g;
    img.data[3 * i + 2] = b;
  }
  return img;
}

TriangleMesh two_spheres() {
  auto a = fixtures::icosphere(2, 0.5);
  auto b = fixtures::icosphere(1, 0.35);
  const auto base = static_cast<std::uint32_t>(a.vertices.size());
  for (auto v : b.vertices) a.vertices.push_back(v + Vec3(0.45, 0.2, -0.5));
  for (auto t : b.triangles) a.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
  return a;
}

class CountingGenerator : public ExternalGenerator {
 public:
  explicit CountingGenerator(ExternalGenerator& inner) : inner_(inner) {}
  RgbImage generate(const PropagationPacket& packet) override {
    ++calls;
    packets.push_back(packet.index);
    return inner_.generate(packet);
  }
  int calls = 0;
  std::vector<std::size_t> packets;

 private:
  ExternalGenerator& inner_;
};

class WrongSizeGenerator : public ExternalGenerator {
 public:
  RgbImage generate(const PropagationPacket&) override { return RgbImage(3, 3, 3); }
};

}  // namespace

TEST(Visibility, IdentityTargetIsCoverageMinusEdges) {
  const auto mesh = fixtures::blob(3);
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 96});
  const auto& cam = rig.views[0].camera;
  const KnownViewSet known{make_known_view(mesh, cam, constant_image(cam, 1, 0, 0), 1.0)};
  const auto render = render_target(mesh, cam);
  const auto m = visibility_mask(mesh, render, known);
  const auto& g = render.gbuffer;
  for (std::size_t i = 0; i < g.size(); ++i)
    EXPECT_EQ(m.data[i], (g.covered(i) && !render.edges.data[i]) ? 1 : 0) << i;

  VisibilityOptions all;
  all.exclude_edges = false;
  const auto full = visibility_mask(mesh, render, known, all);
  EXPECT_EQ(full.data, g.coverage().data);
}

TEST(Visibility, EmptyKnownSetGivesEmptyMask) {
  const auto mesh = fixtures::cube();
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 32});
  const auto m = visibility_mask(mesh, rig.views[1].camera, {});
  EXPECT_EQ(std::count(m.data.begin(), m.data.end(), 1), 0);
}

TEST(Visibility, AgreesWithRayCasting) {
  const auto mesh = two_spheres();
  ASSERT_LE(mesh.triangles.size(), 500u);
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 96});
  int agree = 0, total = 0;
  for (std::size_t t = 1; t < rig.size(); ++t) {
    KnownViewSet known;
    for (std::size_t k = 0; k < t; k += 3)
      known.push_back(make_known_view(mesh, rig.views[k].camera, constant_image(rig.views[k].camera, 0, 0, 0), 1.0));
    const auto render = render_target(mesh, rig.views[t].camera);
    const auto m = visibility_mask(mesh, render, known);
    const auto& g = render.gbuffer;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g.covered(i) || render.edges.data[i]) continue;
      bool want = false;
      for (const auto& v : known) want = want || oracle::visible(mesh, v.camera, g.position[i], 1e-3);
      agree += (m.data[i] != 0) == want;
      ++total;
    }
  }
  ASSERT_GT(total, 0);
  EXPECT_GE(static_cast<double>(agree) / total, 0.995) << agree << " / " << total;
}

TEST(ProjectKnown, ReproducesConstantColorOnMask) {
  const auto mesh = fixtures::blob(3);
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 64});
  KnownViewSet known{make_known_view(mesh, rig.views[0].camera, constant_image(rig.views[0].camera, 0.2f, 0.4f, 0.6f), 1.0),
                     make_known_view(mesh, rig.views[1].camera, constant_image(rig.views[1].camera, 0.2f, 0.4f, 0.6f), 0.1)};
  const auto render = render_target(mesh, rig.views[6].camera);
  const auto mask = visibility_mask(mesh, render, known);
  const auto img = project_known(mesh, render, mask, known);
  int masked = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i]) {
      ++masked;
      EXPECT_NEAR(img.data[3 * i], 0.2f, 1e-6);
      EXPECT_NEAR(img.data[3 * i + 2], 0.6f, 1e-6);
    } else {
      EXPECT_EQ(img.data[3 * i + 1], 0.0f);
    }
  }
  EXPECT_GT(masked, 50);
}

TEST(ProjectKnown, IdentityViewReturnsKnownPixels) {
  const auto mesh = fixtures::cube();
  const auto tex = fixtures::checker_texture(128, 6);
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 64});
  const auto& cam = rig.views[6].camera;
  const auto image = render_textured(mesh, tex, cam);
  const KnownViewSet known{make_known_view(mesh, cam, image, 1.0)};
  const auto render = render_target(mesh, cam);
  const auto mask = visibility_mask(mesh, render, known);
  const auto out = project_known(mesh, render, mask, known);
  for (std::size_t i = 0; i < mask.data.size(); ++i)
    if (mask.data[i]) {
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.data[3 * i + c], image.data[3 * i + c], 1e-5);
    }
}

TEST(Packet, FirstViewHasNoPartialAndPacketsAreDeterministic) {
  const auto mesh = fixtures::cube();
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 48});
  OracleGenerator oracle_gen(mesh, fixtures::checker_texture(96, 6));
  PropagationOptions opt;
  opt.prompt = "checker";
  const auto known = propagation_loop(mesh, rig, oracle_gen, opt);
  const auto p0 = make_packet(mesh, rig, 0, known, opt);
  EXPECT_FALSE(p0.partial);
  EXPECT_FALSE(p0.mask);
  EXPECT_EQ(p0.prompt, "checker");
  const KnownViewSet first(known.begin(), known.begin() + 4);
  const auto a = make_packet(mesh, rig, 4, first, opt);
  const auto b = make_packet(mesh, rig, 4, first, opt);
  ASSERT_TRUE(a.partial && a.mask);
  EXPECT_EQ(a.mask->data, b.mask->data);
  EXPECT_EQ(std::memcmp(a.partial->data.data(), b.partial->data.data(), a.partial->data.size() * sizeof(float)), 0);
  EXPECT_EQ(a.condition.data.data, b.condition.data.data);
}

TEST(PropagationLoop, CallsGeneratorOncePerViewInOrder) {
  const auto mesh = fixtures::cube();
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 32});
  OracleGenerator oracle_gen(mesh, fixtures::checker_texture(64, 6));
  CountingGenerator counter(oracle_gen);
  std::vector<std::size_t> packet_order;
  PropagationOptions opt;
  opt.on_packet = [&](const PropagationPacket& p) { packet_order.push_back(p.index); };
  const auto known = propagation_loop(mesh, rig, counter, opt);
  ASSERT_EQ(known.size(), 10u);
  EXPECT_EQ(counter.calls, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(counter.packets[i], i);
    EXPECT_EQ(packet_order[i], i);
    EXPECT_EQ(known[i].weight, rig.views[i].weight);
  }

  // Resuming with the first six images skips their generator calls.
  std::vector<RgbImage> prior;
  for (std::size_t i = 0; i < 6; ++i) prior.push_back(known[i].image);
  CountingGenerator resumed(oracle_gen);
  const auto again = propagation_loop(mesh, rig, resumed, {}, prior);
  EXPECT_EQ(resumed.calls, 4);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(again[i].image.data, known[i].image.data);
}

TEST(PropagationLoop, WrongSizeImageIsGeneratorFailure) {
  const auto mesh = fixtures::cube();
  const auto rig = rig_for_mesh(mesh, RigOptions{.resolution = 16});
  WrongSizeGenerator bad;
  try {
    propagation_loop(mesh, rig, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::GeneratorFailure);
  }
}

TEST(RenderTextured, RequiresUvs) {
  const auto sphere = fixtures::icosphere(1);
  try {
    render_textured(sphere, RgbImage(4, 4, 3), look_at(Vec3(0, 0, -3), Vec3::Zero(), Vec3::UnitY(), 10, 10, 8, 8, 16, 16));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingUVs);
  }
}
