// Adam with bias correction over a ParamStore.
#pragma once

#include <cmath>
#include <map>
#include <string>

#include "cmlf/model/params.hpp"

namespace cmlf::train {

class AdamOptimizer {
 public:
  explicit AdamOptimizer(model::ParamStore& params, double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8)
      : params_(params), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    for (auto& [name, tensor] : params.map()) {
      m_[name] = Eigen::MatrixXd::Zero(tensor.value.rows(), tensor.value.cols());
      v_[name] = Eigen::MatrixXd::Zero(tensor.value.rows(), tensor.value.cols());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, tensor] : params_.map()) {
      Eigen::MatrixXd& m = m_[name];
      Eigen::MatrixXd& v = v_[name];
      m = beta1_ * m + (1.0 - beta1_) * tensor.grad;
      v = beta2_ * v.array().matrix() + (1.0 - beta2_) * tensor.grad.array().square().matrix();
      tensor.value.array() -=
          lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
    }
  }

 private:
  model::ParamStore& params_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

}  // namespace cmlf::train
