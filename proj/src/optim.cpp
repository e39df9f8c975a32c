#include "indexcast/optim.hpp"

#include <cmath>

#include "indexcast/errors.hpp"

namespace indexcast::nn {

Adam::Adam(std::vector<Tensor*> params, const AdamConfig& cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.learning_rate >= 0) || !(cfg_.eps > 0)) {
    throw config_error("adam: learning_rate must be >= 0 and eps > 0");
  }
  if (!(cfg_.beta1 >= 0 && cfg_.beta1 < 1) || !(cfg_.beta2 >= 0 && cfg_.beta2 < 1)) {
    throw config_error("adam: betas must be in [0, 1)");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* p : params_) {
    m_.emplace_back(p->rows, p->cols);
    v_.emplace_back(p->rows, p->cols);
  }
}

void Adam::step(const std::vector<Tensor*>& grads) {
  if (grads.size() != params_.size()) throw train_error("adam: gradient count mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const Tensor& g = *grads[i];
    if (g.rows != p.rows || g.cols != p.cols) throw train_error("adam: gradient shape mismatch");
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                                    cfg_.weight_decay * p[j]);
    }
  }
}

}  // namespace indexcast::nn
