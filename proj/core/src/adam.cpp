#include "caag/adam.hpp"

#include <cmath>

namespace caag::diff {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.reserve(params_.size());
  for (Parameter* p : params_)
    slots_.push_back(Slot{Tensor::zeros(p->value.shape), Tensor::zeros(p->value.shape)});
}

void Adam::step() {
  for (Parameter* p : params_)
    if (!p->grad_ready)
      throw Error("adam: gradient missing for parameter '" + p->name + "'");

  t_ += 1;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    Slot& s = slots_[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      double g = p.grad.v[i];
      s.m.v[i] = cfg_.beta1 * s.m.v[i] + (1.0 - cfg_.beta1) * g;
      s.v.v[i] = cfg_.beta2 * s.v.v[i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = s.m.v[i] / bc1;
      double vhat = s.v.v[i] / bc2;
      p.value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    p.zero_grad();
  }
}

double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.v) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double s = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.v) g *= s;
  }
  return norm;
}

}  // namespace caag::diff
