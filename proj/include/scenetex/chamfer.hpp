#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "scenetex/error.hpp"
#include "scenetex/geometry.hpp"
#include "scenetex/kdtree.hpp"

namespace scenetex {

namespace detail {

// mean over `queries` of the squared distance to the nearest indexed point
template <int D, typename P>
double mean_nearest(const KdTree<D>& index, const std::vector<P>& queries) {
  double sum = 0.0;
  for (const auto& q : queries) sum += index.nearest(to_array(q)).sq_dist;
  return sum / static_cast<double>(queries.size());
}

template <typename P>
double symmetric_chamfer(const std::vector<P>& a, const std::vector<P>& b) {
  const auto index_a = make_index(a);
  const auto index_b = make_index(b);
  return mean_nearest(index_b, a) + mean_nearest(index_a, b);
}

inline std::vector<Vec2> project_visible(const PinholeCamera& cam, const std::vector<Vec3>& points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const auto& p : points)
    if (auto px = cam.project(p)) out.push_back(*px);
  return out;
}

}  // namespace detail

/// Symmetric squared Chamfer distance:
/// mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2.
inline double chamfer3d(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "chamfer3d on empty cloud");
  return detail::symmetric_chamfer(a, b);
}

inline double chamfer3d(const PointCloud& a, const PointCloud& b) { return chamfer3d(a.points, b.points); }

/// Chamfer distance between the pixel projections of two clouds. Points at or
/// behind the image plane are dropped from their side.
inline double chamfer2d(const PinholeCamera& cam, const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "chamfer2d on empty cloud");
  const auto pa = detail::project_visible(cam, a);
  const auto pb = detail::project_visible(cam, b);
  if (pa.empty() || pb.empty()) throw Error(ErrorCode::AllPointsCulled, "every point of one cloud is behind the camera");
  return detail::symmetric_chamfer(pa, pb);
}

inline double chamfer2d(const PinholeCamera& cam, const PointCloud& a, const PointCloud& b) {
  return chamfer2d(cam, a.points, b.points);
}

struct PoseGradient {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
  double log_scale = 0.0;

  Eigen::Matrix<double, 7, 1> to_vector() const {
    Eigen::Matrix<double, 7, 1> v;
    v << translation, rotation, log_scale;
    return v;
  }
  double norm() const { return to_vector().norm(); }
  bool finite() const { return to_vector().allFinite(); }
};

/// d(R(r) q) / dr for the Rodrigues rotation R(r).
inline Mat3 rotation_jacobian(const Vec3& r, const Vec3& q) {
  const double theta = r.norm();
  const double t2 = theta * theta;
  double a, b, da, db;  // da = a'(theta)/theta, db = b'(theta)/theta
  if (theta < 1e-4) {
    a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    da = -1.0 / 3.0 + t2 / 30.0;
    db = -1.0 / 12.0 + t2 / 180.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    a = s / theta;
    b = (1.0 - c) / t2;
    da = (theta * c - s) / (t2 * theta);
    db = (theta * s - 2.0 * (1.0 - c)) / (t2 * t2);
  }
  const Vec3 rxq = r.cross(q);
  const Vec3 rxrxq = r.cross(rxq);
  Mat3 q_hat;
  q_hat << 0, -q.z(), q.y(), q.z(), 0, -q.x(), -q.y(), q.x(), 0;
  const Mat3 d_rxrxq = r.dot(q) * Mat3::Identity() + r * q.transpose() - 2.0 * q * r.transpose();
  return rxq * (da * r.transpose()) - a * q_hat + rxrxq * (db * r.transpose()) + b * d_rxrxq;
}

struct LossAndGrad {
  double loss = 0.0;
  double chamfer3d = 0.0;  // unweighted 3D term
  double chamfer2d = 0.0;  // unweighted 2D term, 0 when not evaluated
  PoseGradient grad;
};

/// Weighted 3D + projected 2D Chamfer loss of a posed source cloud against a
/// fixed target, with analytic gradients. Nearest-neighbour correspondences
/// are recomputed on every call and held constant for the gradient.
///
/// The reverse 3D direction queries an index over the unposed source: a
/// similarity transform preserves nearest-neighbour order, so target points
/// are mapped into the source frame instead of re-indexing the posed cloud.
class ChamferObjective {
 public:
  ChamferObjective(std::vector<Vec3> source, std::vector<Vec3> target, PinholeCamera camera)
      : source_(std::move(source)), target_(std::move(target)), camera_(std::move(camera)) {
    if (source_.empty() || target_.empty()) throw Error(ErrorCode::EmptyInput, "chamfer objective on empty cloud");
    source_index_ = make_index(source_);
    target_index_ = make_index(target_);
    target_pixels_ = detail::project_visible(camera_, target_);
    if (!target_pixels_.empty()) target_pixel_index_ = make_index(target_pixels_);
  }

  const std::vector<Vec3>& source() const { return source_; }
  const std::vector<Vec3>& target() const { return target_; }
  const PinholeCamera& camera() const { return camera_; }

  LossAndGrad evaluate(const PoseParams& pose, double lambda3d, double lambda2d, bool use2d,
                       bool with_gradient = true) const {
    const std::size_t n = source_.size();
    const Mat3 rot = pose.rotation_matrix();
    const double scale = pose.scale();
    const Mat3 sr = scale * rot;

    std::vector<Vec3> posed(n);
    for (std::size_t j = 0; j < n; ++j) posed[j] = sr * source_[j] + pose.translation;
    std::vector<Vec3> grad_posed(with_gradient ? n : 0, Vec3::Zero());

    LossAndGrad out;

    // 3D, posed source -> target
    double forward = 0.0;
    const double w_fwd = 2.0 * lambda3d / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto nn = target_index_.nearest(to_array(posed[j]));
      forward += nn.sq_dist;
      if (with_gradient) grad_posed[j] += w_fwd * (posed[j] - target_[nn.index]);
    }
    forward /= static_cast<double>(n);

    // 3D, target -> posed source
    double reverse = 0.0;
    const double w_rev = 2.0 * lambda3d / static_cast<double>(target_.size());
    const Mat3 inv = rot.transpose() / scale;
    for (const auto& b : target_) {
      const auto nn = source_index_.nearest(to_array(Vec3(inv * (b - pose.translation))));
      const Vec3 diff = posed[nn.index] - b;
      reverse += diff.squaredNorm();
      if (with_gradient) grad_posed[nn.index] += w_rev * diff;
    }
    reverse /= static_cast<double>(target_.size());

    out.chamfer3d = forward + reverse;
    out.loss = lambda3d * out.chamfer3d;

    if (use2d && lambda2d != 0.0) {
      out.chamfer2d = add_projected_term(posed, lambda2d, grad_posed, with_gradient);
      out.loss += lambda2d * out.chamfer2d;
    }

    if (with_gradient) {
      for (std::size_t j = 0; j < n; ++j) {
        const Vec3& g = grad_posed[j];
        out.grad.translation += g;
        out.grad.log_scale += g.dot(posed[j] - pose.translation);
        out.grad.rotation += rotation_jacobian(pose.rotation, scale * source_[j]).transpose() * g;
      }
    }
    return out;
  }

 private:
  double add_projected_term(const std::vector<Vec3>& posed, double lambda2d, std::vector<Vec3>& grad_posed,
                            bool with_gradient) const {
    if (target_pixels_.empty()) throw Error(ErrorCode::AllPointsCulled, "every target point is behind the camera");
    const Mat3& rcw = camera_.rotation_camera_from_world();

    std::vector<Vec2> pixels;
    std::vector<Vec3> cam_points;
    std::vector<std::size_t> owner;
    pixels.reserve(posed.size());
    for (std::size_t j = 0; j < posed.size(); ++j) {
      const Vec3 pc = camera_.to_camera(posed[j]);
      if (auto px = camera_.project_camera(pc)) {
        pixels.push_back(*px);
        cam_points.push_back(pc);
        owner.push_back(j);
      }
    }
    if (pixels.empty()) throw Error(ErrorCode::AllPointsCulled, "every posed source point is behind the camera");

    std::vector<Vec2> grad_px(with_gradient ? pixels.size() : 0, Vec2::Zero());
    double forward = 0.0;
    const double w_fwd = 2.0 * lambda2d / static_cast<double>(pixels.size());
    for (std::size_t k = 0; k < pixels.size(); ++k) {
      const auto nn = target_pixel_index_.nearest(to_array(pixels[k]));
      forward += nn.sq_dist;
      if (with_gradient) grad_px[k] += w_fwd * (pixels[k] - target_pixels_[nn.index]);
    }
    forward /= static_cast<double>(pixels.size());

    const auto pixel_index = make_index(pixels);
    double reverse = 0.0;
    const double w_rev = 2.0 * lambda2d / static_cast<double>(target_pixels_.size());
    for (const auto& t : target_pixels_) {
      const auto nn = pixel_index.nearest(to_array(t));
      reverse += nn.sq_dist;
      if (with_gradient) grad_px[nn.index] += w_rev * (pixels[nn.index] - t);
    }
    reverse /= static_cast<double>(target_pixels_.size());

    if (with_gradient) {
      for (std::size_t k = 0; k < pixels.size(); ++k) {
        const Vec3& pc = cam_points[k];
        const double iz = 1.0 / pc.z();
        const Vec2& g = grad_px[k];
        const Vec3 grad_cam(camera_.fx() * iz * g.x(), camera_.fy() * iz * g.y(),
                            -(camera_.fx() * pc.x() * g.x() + camera_.fy() * pc.y() * g.y()) * iz * iz);
        grad_posed[owner[k]] += rcw.transpose() * grad_cam;
      }
    }
    return forward + reverse;
  }

  std::vector<Vec3> source_;
  std::vector<Vec3> target_;
  PinholeCamera camera_;
  KdTree3 source_index_;
  KdTree3 target_index_;
  std::vector<Vec2> target_pixels_;
  KdTree2 target_pixel_index_;
};

/// loss = lambda3d * chamfer3d(pose(M), PC) + [use2d] lambda2d * chamfer2d(cam, pose(M), PC)
inline LossAndGrad loss_and_grad(const PoseParams& pose, const PointCloud& source, const PointCloud& target,
                                 const PinholeCamera& cam, double lambda3d, double lambda2d, bool use2d) {
  return ChamferObjective(source.points, target.points, cam).evaluate(pose, lambda3d, lambda2d, use2d);
}

}  // namespace scenetex
