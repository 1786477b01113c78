#pragma once

#include <functional>
#include <string>
#include <vector>

#include "caag/tape.hpp"

namespace caag::diff {

struct FdReport {
  double max_rel = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;

  bool pass(double tol) const { return max_rel < tol; }
};

/// Central finite-difference check of a scalar loss against tape gradients.
///
/// `loss(with_grad)` must rebuild the graph from the current parameter values
/// and return the loss; when with_grad is true it must also run backward so
/// gradients land in the parameters. Relative error uses a small denominators
/// floor so near-zero gradients are compared absolutely.
FdReport fd_check(const std::vector<Parameter*>& params,
                  const std::function<double(bool with_grad)>& loss,
                  double h = 1e-5);

double rel_err(double a, double b);

/// Negative-control fixture: forward computes c*x but the recorded backward
/// rule is wrong on purpose, so fd_check must flag it.
Var corrupted_scale(Var x, double c);

}  // namespace caag::diff
