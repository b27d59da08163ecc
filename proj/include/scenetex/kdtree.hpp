#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"

namespace scenetex {

/// Exact nearest-neighbour index over a fixed point set (dimension D).
/// Ties at equal squared distance resolve to the lowest original index, so
/// results coincide with a linear scan.
template <int D>
class KdTree {
 public:
  using Point = std::array<double, D>;

  struct Neighbor {
    std::uint32_t index = 0;
    double sq_dist = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(std::vector<Point> points, std::uint32_t leaf_size = 8) : leaf_size_(std::max<std::uint32_t>(1, leaf_size)) {
    build(std::move(points));
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  Neighbor nearest(const Point& q) const {
    if (empty()) throw Error(ErrorCode::EmptyInput, "nearest-neighbour query on empty index");
    Neighbor best;
    search_nearest(0, q, best);
    return best;
  }

  /// The k nearest points, sorted by (squared distance, index).
  std::vector<Neighbor> knn(const Point& q, std::size_t k) const {
    k = std::min(k, size());
    std::vector<Neighbor> heap;
    if (k == 0) return heap;
    heap.reserve(k + 1);
    search_knn(0, q, k, heap);
    std::sort_heap(heap.begin(), heap.end(), worse_first);
    return heap;
  }

 private:
  struct Node {
    double split = 0.0;
    std::int32_t dim = -1;  // -1 marks a leaf
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  static double sq_distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (int d = 0; d < D; ++d) {
      const double t = a[d] - b[d];
      s += t * t;
    }
    return s;
  }

  static bool better(double d, std::uint32_t idx, const Neighbor& n) {
    return d < n.sq_dist || (d == n.sq_dist && idx < n.index);
  }

  // Heap comparator: the worst neighbour sits on top.
  static bool worse_first(const Neighbor& a, const Neighbor& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  }

  void build(std::vector<Point> points) {
    const auto n = static_cast<std::uint32_t>(points.size());
    if (n == 0) return;
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    nodes_.reserve(2 * (n / leaf_size_ + 1));
    build_node(points, order, 0, n);
    points_.resize(n);
    indices_ = order;
    for (std::uint32_t i = 0; i < n; ++i) points_[i] = points[order[i]];
  }

  std::int32_t build_node(const std::vector<Point>& pts, std::vector<std::uint32_t>& order, std::uint32_t begin,
                          std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{0.0, -1, begin, end, -1, -1});
    if (end - begin <= leaf_size_) return id;

    Point lo, hi;
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (auto i = begin; i < end; ++i)
      for (int d = 0; d < D; ++d) {
        lo[d] = std::min(lo[d], pts[order[i]][d]);
        hi[d] = std::max(hi[d], pts[order[i]][d]);
      }
    int dim = 0;
    for (int d = 1; d < D; ++d)
      if (hi[d] - lo[d] > hi[dim] - lo[dim]) dim = d;
    if (!(hi[dim] > lo[dim])) return id;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return pts[a][dim] < pts[b][dim]; });
    const double split = pts[order[mid]][dim];
    nodes_[id].dim = dim;
    nodes_[id].split = split;
    const auto left = build_node(pts, order, begin, mid);
    const auto right = build_node(pts, order, mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search_nearest(std::int32_t node_id, const Point& q, Neighbor& best) const {
    const Node& node = nodes_[node_id];
    if (node.dim < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const double d = sq_distance(q, points_[i]);
        if (better(d, indices_[i], best)) best = Neighbor{indices_[i], d};
      }
      return;
    }
    const double diff = q[node.dim] - node.split;
    const auto near_child = diff < 0.0 ? node.left : node.right;
    const auto far_child = diff < 0.0 ? node.right : node.left;
    search_nearest(near_child, q, best);
    // Equality keeps candidates that may win the index tie-break.
    if (diff * diff <= best.sq_dist) search_nearest(far_child, q, best);
  }

  void search_knn(std::int32_t node_id, const Point& q, std::size_t k, std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.dim < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const double d = sq_distance(q, points_[i]);
        if (heap.size() < k) {
          heap.push_back(Neighbor{indices_[i], d});
          std::push_heap(heap.begin(), heap.end(), worse_first);
        } else if (better(d, indices_[i], heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse_first);
          heap.back() = Neighbor{indices_[i], d};
          std::push_heap(heap.begin(), heap.end(), worse_first);
        }
      }
      return;
    }
    const double diff = q[node.dim] - node.split;
    const auto near_child = diff < 0.0 ? node.left : node.right;
    const auto far_child = diff < 0.0 ? node.right : node.left;
    search_knn(near_child, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().sq_dist) search_knn(far_child, q, k, heap);
  }

  std::uint32_t leaf_size_ = 8;
  std::vector<Node> nodes_;
  std::vector<Point> points_;          // reordered into leaf order
  std::vector<std::uint32_t> indices_;  // original index of points_[i]
};

using KdTree2 = KdTree<2>;
using KdTree3 = KdTree<3>;

inline KdTree3::Point to_array(const Vec3& p) { return {p.x(), p.y(), p.z()}; }
inline KdTree2::Point to_array(const Vec2& p) { return {p.x(), p.y()}; }

inline KdTree3 make_index(const std::vector<Vec3>& points) {
  std::vector<KdTree3::Point> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back(to_array(p));
  return KdTree3(std::move(pts));
}

inline KdTree2 make_index(const std::vector<Vec2>& points) {
  std::vector<KdTree2::Point> pts;
  pts.reserve(points.size());
  for (const auto& p : points) pts.push_back(to_array(p));
  return KdTree2(std::move(pts));
}

}  // namespace scenetex
