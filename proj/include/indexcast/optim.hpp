#pragma once

#include <vector>

#include "indexcast/autodiff.hpp"

namespace indexcast::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;  // decoupled: applied to the parameter, not the gradient
};

// Adam with bias correction and decoupled weight decay. One step on a fresh
// optimizer moves each parameter by about learning_rate against the sign of
// its gradient.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, const AdamConfig& cfg);

  void step(const std::vector<Tensor*>& grads);

  int steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig cfg_;
  int t_ = 0;
};

}  // namespace indexcast::nn
