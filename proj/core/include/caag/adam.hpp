#pragma once

#include <cstdint>
#include <vector>

#include "caag/tape.hpp"

namespace caag::diff {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over a fixed parameter list. step() consumes the
/// accumulated gradients and zeroes them.
class Adam {
public:
  struct Slot {
    Tensor m;
    Tensor v;
  };

  Adam(std::vector<Parameter*> params, AdamConfig cfg);

  void step();

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::uint64_t steps() const { return t_; }

  const std::vector<Parameter*>& params() const { return params_; }
  std::vector<Slot>& slots() { return slots_; }
  void set_steps(std::uint64_t t) { t_ = t; }

private:
  std::vector<Parameter*> params_;
  std::vector<Slot> slots_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

/// Scale gradients so their global L2 norm is at most max_norm. Returns the
/// pre-clip norm.
double clip_global_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace caag::diff
