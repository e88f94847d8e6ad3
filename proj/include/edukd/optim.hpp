#pragma once

// Adam over a fixed parameter group. The L2 penalty is added to the raw
// gradient before the moment updates.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "edukd/tensor.hpp"

namespace edukd {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (cfg_.lr <= 0.0) throw std::invalid_argument("Adam: learning rate must be positive");
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].size(), 0.0);
      v_[i].assign(params_[i].size(), 0.0);
    }
  }

  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& node = *params_[i].node();
      detail::ensure_grad(node);
      for (std::size_t j = 0; j < node.data.size(); ++j) {
        double g = node.grad[j] + cfg_.weight_decay * node.data[j];
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
        double mhat = m_[i][j] / bc1;
        double vhat = v_[i][j] / bc2;
        node.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void zero_grad() { zero_grads(params_); }

  long long step_count() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long t_ = 0;
};

}  // namespace edukd
