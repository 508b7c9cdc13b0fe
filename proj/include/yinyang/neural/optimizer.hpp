#pragma once

#include <cmath>
#include <vector>

#include "yinyang/neural/tensor.hpp"

namespace yinyang::neural {

// Scales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename Scalar>
double clip_grad_norm(const ParamList<Scalar>& params, double max_norm) {
  double sq = 0;
  for (const auto* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const auto factor = static_cast<Scalar>(max_norm / (norm + 1e-12));
    for (auto* p : params) p->grad *= factor;
  }
  return norm;
}

// Adam with decoupled weight decay, applied only to params flagged `decay`.
template <typename Scalar>
class AdamW {
 public:
  struct Options {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(ParamList<Scalar> params, Options options) : params_(std::move(params)), options_(options) {
    for (const auto* p : params_) {
      m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const auto b1 = static_cast<Scalar>(options_.beta1);
    const auto b2 = static_cast<Scalar>(options_.beta2);
    const auto lr = static_cast<Scalar>(options_.learning_rate);
    const auto step_size = static_cast<Scalar>(options_.learning_rate / c1);
    const auto root_c2 = static_cast<Scalar>(std::sqrt(c2));
    const auto eps = static_cast<Scalar>(options_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      if (p.decay && options_.weight_decay > 0) p.value *= Scalar(1) - lr * static_cast<Scalar>(options_.weight_decay);
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step_size * m_[i].array() / (v_[i].array().sqrt() / root_c2 + eps);
    }
  }

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  const Options& options() const { return options_; }
  long steps() const { return t_; }

 private:
  ParamList<Scalar> params_;
  Options options_;
  std::vector<Matrix<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace yinyang::neural
