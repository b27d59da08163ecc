#pragma once

#include <cmath>

#include <Eigen/Core>

namespace scenetex {

struct AdamParameters {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments over a fixed-size parameter vector.
template <int N>
class Adam {
 public:
  using Vector = Eigen::Matrix<double, N, 1>;

  explicit Adam(AdamParameters params = {}) : params_(params) { reset(); }

  void reset() {
    mom1_.setZero();
    mom2_.setZero();
    step_ = 0;
  }

  int steps() const { return step_; }

  // x <- x - lr * m_hat / (sqrt(v_hat) + eps)
  void step(Vector& x, const Vector& grad) {
    ++step_;
    mom1_ = params_.beta1 * mom1_ + (1.0 - params_.beta1) * grad;
    mom2_ = params_.beta2 * mom2_ + (1.0 - params_.beta2) * grad.cwiseProduct(grad);
    const double corr1 = 1.0 - std::pow(params_.beta1, step_);
    const double corr2 = 1.0 - std::pow(params_.beta2, step_);
    for (int i = 0; i < N; ++i)
      x(i) -= params_.learning_rate * (mom1_(i) / corr1) / (std::sqrt(mom2_(i) / corr2) + params_.epsilon);
  }

 private:
  AdamParameters params_;
  Vector mom1_;
  Vector mom2_;
  int step_ = 0;
};

}  // namespace scenetex
