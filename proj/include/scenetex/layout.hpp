#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scenetex/adam.hpp"
#include "scenetex/chamfer.hpp"
#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/kdtree.hpp"
#include "scenetex/sampling.hpp"

namespace scenetex {

// Target clouds smaller than this are skipped instead of optimized.
inline constexpr std::size_t kMinInstancePoints = 50;

/// Pose optimization schedule. Defaults are the published settings: 20 epochs
/// of 2000 Adam steps, the first 1200 of each epoch on the 3D term only.
struct OptimConfig {
  double lambda3d = 1.0;
  double lambda2d = 5e-2;
  int epochs = 20;
  int iters_per_epoch = 2000;
  int warmup_3d_iters = 1200;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t max_points = 4096;
  std::uint64_t seed = 0;
  bool record_iterations = false;

  void validate() const {
    if (epochs < 1 || iters_per_epoch < 1) throw Error(ErrorCode::InvalidInput, "epochs and iterations must be >= 1");
    if (warmup_3d_iters < 0 || warmup_3d_iters > iters_per_epoch)
      throw Error(ErrorCode::InvalidInput, "warmup_3d_iters must lie in [0, iters_per_epoch]");
    if (!(learning_rate > 0.0) || !(adam_beta1 > 0.0) || !(adam_beta2 > 0.0) || !(adam_epsilon > 0.0))
      throw Error(ErrorCode::InvalidInput, "optimizer rates must be positive");
    if (adam_beta1 >= 1.0 || adam_beta2 >= 1.0) throw Error(ErrorCode::InvalidInput, "Adam betas must be < 1");
    if (lambda3d < 0.0 || lambda2d < 0.0) throw Error(ErrorCode::InvalidInput, "loss weights must be non-negative");
    if (max_points < 1) throw Error(ErrorCode::InvalidInput, "max_points must be >= 1");
  }

  /// Same schedule shape with fewer steps; the warmup keeps its 60% share.
  OptimConfig scaled(int new_epochs, int new_iters) const {
    OptimConfig c = *this;
    c.epochs = new_epochs;
    c.iters_per_epoch = new_iters;
    c.warmup_3d_iters = static_cast<int>(std::lround(static_cast<double>(warmup_3d_iters) * new_iters / iters_per_epoch));
    return c;
  }
};

struct EpochRecord {
  double loss = 0.0;  // joint loss at the end of the epoch
  double chamfer3d = 0.0;
  double chamfer2d = 0.0;
  PoseParams pose;
};

struct OptimTrace {
  PoseParams initial_pose;
  double initial_loss = 0.0;
  std::vector<EpochRecord> epochs;
  std::vector<double> iteration_losses;  // only with record_iterations
  std::size_t best_epoch = 0;
};

struct OptimResult {
  PoseParams pose;
  OptimTrace trace;
};

/// Centroid alignment plus bounding-box-diagonal scale; rotation starts at zero.
inline PoseParams init_pose(const PointCloud& source, const PointCloud& target) {
  if (source.empty() || target.empty()) throw Error(ErrorCode::EmptyInput, "init_pose on empty cloud");
  const double diag_source = source.bounds().diagonal();
  const double diag_target = target.bounds().diagonal();
  if (!(diag_source > 1e-12) || !(diag_target > 1e-12))
    throw Error(ErrorCode::DegenerateCloud, "cloud bounding box has zero diagonal");
  PoseParams pose;
  pose.log_scale = std::log(diag_target / diag_source);
  // Translation applies after scaling, so the scaled source centroid is what must land on the target's.
  pose.translation = target.centroid() - pose.scale() * source.centroid();
  return pose;
}

/// Both clouds reduced to at most `max_points` with independent seeded streams.
inline std::pair<PointCloud, PointCloud> prepare_clouds(const PointCloud& source, const PointCloud& target,
                                                        const OptimConfig& cfg) {
  return {subsample(source, cfg.max_points, cfg.seed, 1), subsample(target, cfg.max_points, cfg.seed, 2)};
}

namespace detail {

inline std::string describe(const PoseParams& p) {
  std::ostringstream os;
  os << "T=(" << p.translation.transpose() << ") r=(" << p.rotation.transpose() << ") logS=" << p.log_scale;
  return os.str();
}

}  // namespace detail

/// Staged Adam optimization of a similarity pose aligning `source` to `target`.
/// Each epoch restarts the Adam moments, runs warmup iterations on the 3D term
/// and the remainder on the joint loss. The pose of the epoch with the lowest
/// end-of-epoch joint loss is returned.
inline OptimResult optimize_pose(const PointCloud& source, const PointCloud& target, const PinholeCamera& cam,
                                 const OptimConfig& cfg) {
  cfg.validate();
  auto [src, tgt] = prepare_clouds(source, target, cfg);
  if (src.empty() || tgt.empty()) throw Error(ErrorCode::EmptyInput, "optimize_pose on empty cloud");

  const ChamferObjective objective(src.points, tgt.points, cam);
  OptimResult result;
  PoseParams pose = init_pose(src, tgt);
  result.trace.initial_pose = pose;
  result.trace.initial_loss = objective.evaluate(pose, cfg.lambda3d, cfg.lambda2d, true, false).loss;

  Adam<7> adam({cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon});
  auto params = pose.to_vector();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.reset();
    for (int it = 0; it < cfg.iters_per_epoch; ++it) {
      const bool joint = it >= cfg.warmup_3d_iters;
      const auto current = PoseParams::from_vector(params);
      const auto eval = objective.evaluate(current, cfg.lambda3d, cfg.lambda2d, joint);
      if (!std::isfinite(eval.loss) || !eval.grad.finite())
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + " iteration " +
                                                  std::to_string(it) + ", pose " + detail::describe(current));
      if (cfg.record_iterations) result.trace.iteration_losses.push_back(eval.loss);
      adam.step(params, eval.grad.to_vector());
    }
    const auto end_pose = PoseParams::from_vector(params);
    const auto eval = objective.evaluate(end_pose, cfg.lambda3d, cfg.lambda2d, true, false);
    if (!std::isfinite(eval.loss))
      throw Error(ErrorCode::NonFiniteLoss, "non-finite end-of-epoch loss at epoch " + std::to_string(epoch) +
                                                ", pose " + detail::describe(end_pose));
    result.trace.epochs.push_back(EpochRecord{eval.loss, eval.chamfer3d, eval.chamfer2d, end_pose});
  }

  std::size_t best = 0;
  for (std::size_t e = 1; e < result.trace.epochs.size(); ++e)
    if (result.trace.epochs[e].loss < result.trace.epochs[best].loss) best = e;
  result.trace.best_epoch = best;
  result.pose = result.trace.epochs[best].pose;
  return result;
}

/// F-score (percent) at distance threshold `tau`: harmonic mean of the share
/// of `a` within tau of `b` and the share of `b` within tau of `a`.
inline double fscore(const PointCloud& a, const PointCloud& b, double tau) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "fscore on empty cloud");
  if (!(tau > 0.0)) throw Error(ErrorCode::InvalidInput, "fscore threshold must be positive");
  const double tau2 = tau * tau;
  auto share_within = [tau2](const std::vector<Vec3>& queries, const KdTree3& index) {
    std::size_t hits = 0;
    for (const auto& q : queries)
      if (index.nearest(to_array(q)).sq_dist <= tau2) ++hits;
    return static_cast<double>(hits) / static_cast<double>(queries.size());
  };
  const double precision = share_within(a.points, make_index(b.points));
  const double recall = share_within(b.points, make_index(a.points));
  if (precision + recall == 0.0) return 0.0;
  return 200.0 * precision * recall / (precision + recall);
}

struct SceneNode {
  std::string name;
  TriangleMesh mesh;  // canonical-space geometry, never welded with other nodes
  PoseParams pose;
  bool background = false;

  TriangleMesh world_mesh() const { return apply_pose(pose, mesh); }
};

struct SceneGraph {
  std::vector<SceneNode> nodes;
};

inline SceneGraph assemble_scene(const std::vector<std::pair<TriangleMesh, PoseParams>>& instances,
                                 const std::optional<std::pair<TriangleMesh, PoseParams>>& background = std::nullopt) {
  SceneGraph scene;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (!instances[i].second.finite()) throw Error(ErrorCode::InvalidInput, "non-finite instance pose");
    scene.nodes.push_back(SceneNode{"instance_" + std::to_string(i), instances[i].first, instances[i].second, false});
  }
  if (background) {
    if (!background->second.finite()) throw Error(ErrorCode::InvalidInput, "non-finite background pose");
    scene.nodes.push_back(SceneNode{"background", background->first, background->second, true});
  }
  return scene;
}

}  // namespace scenetex
