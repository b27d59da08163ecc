#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "scenetex/kdtree.hpp"

using namespace scenetex;

TEST(KdTree, NearestMatchesBruteForce3d) {
  std::mt19937_64 rng(21);
  for (std::size_t n : {1u, 2u, 7u, 100u, 1000u}) {
    const auto pts = oracle::random_points(rng, n);
    const auto queries = oracle::random_points(rng, 200, -1.5, 1.5);
    const auto index = make_index(pts);
    for (const auto& q : queries) {
      const auto got = index.nearest(to_array(q));
      const auto want = oracle::brute_nearest(pts, q);
      EXPECT_EQ(got.index, want.first);
      EXPECT_DOUBLE_EQ(got.sq_dist, want.second);
    }
  }
}

TEST(KdTree, NearestMatchesBruteForce2d) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 640.0);
  std::vector<Vec2> pts(500);
  for (auto& p : pts) p = Vec2(u(rng), u(rng));
  const auto index = make_index(pts);
  for (int i = 0; i < 300; ++i) {
    const Vec2 q(u(rng), u(rng));
    const auto got = index.nearest(to_array(q));
    const auto want = oracle::brute_nearest(pts, q);
    EXPECT_EQ(got.index, want.first);
    EXPECT_DOUBLE_EQ(got.sq_dist, want.second);
  }
}

TEST(KdTree, TiesResolveToLowestIndex) {
  std::vector<Vec3> pts(40, Vec3(1, 1, 1));
  pts.push_back(Vec3(-1, -1, -1));
  const auto index = make_index(pts);
  EXPECT_EQ(index.nearest(to_array(Vec3(0.9, 1, 1))).index, 0u);
  // two points equidistant from the query
  std::vector<Vec3> pair = {Vec3(5, 0, 0), Vec3(1, 0, 0), Vec3(-1, 0, 0)};
  EXPECT_EQ(make_index(pair).nearest(to_array(Vec3(0, 0, 0))).index, 1u);
}

TEST(KdTree, KnnSortedAndMatchesBruteForce) {
  std::mt19937_64 rng(23);
  const auto pts = oracle::random_points(rng, 400);
  const auto index = make_index(pts);
  for (const auto& q : oracle::random_points(rng, 30)) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - q).squaredNorm(), i);
    std::sort(all.begin(), all.end());
    const auto got = index.knn(to_array(q), 12);
    ASSERT_EQ(got.size(), 12u);
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].index, all[k].second);
      EXPECT_DOUBLE_EQ(got[k].sq_dist, all[k].first);
    }
  }
  EXPECT_EQ(index.knn(to_array(Vec3(0, 0, 0)), 1000).size(), pts.size());
  EXPECT_TRUE(index.knn(to_array(Vec3(0, 0, 0)), 0).empty());
}

TEST(KdTree, EmptyIndexThrows) {
  const auto index = make_index(std::vector<Vec3>{});
  EXPECT_THROW(index.nearest(to_array(Vec3(0, 0, 0))), Error);
}
