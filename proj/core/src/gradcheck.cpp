#include "caag/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace caag::diff {

double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-2});
  return std::fabs(a - b) / denom;
}

FdReport fd_check(const std::vector<Parameter*>& params,
                  const std::function<double(bool)>& loss, double h) {
  for (Parameter* p : params) p->zero_grad();
  loss(true);

  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);

  FdReport rep;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      double orig = p.value.v[i];
      p.value.v[i] = orig + h;
      double lp = loss(false);
      p.value.v[i] = orig - h;
      double lm = loss(false);
      p.value.v[i] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double a = analytic[k].v[i];
      double e = rel_err(a, fd);
      rep.checked += 1;
      if (e > rep.max_rel) {
        rep.max_rel = e;
        rep.worst_param = p.name;
        rep.worst_index = i;
        rep.analytic = a;
        rep.numeric = fd;
      }
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return rep;
}

Var corrupted_scale(Var x, double c) {
  Tensor y = x.tape->val(x);
  for (double& v : y.v) v *= c;
  Tape* t = x.tape;
  // wrong on purpose: backward uses c + 0.5
  return t->make("corrupted_scale", std::move(y), t->needs_grad(x),
                 [x, c](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       gx->v[i] += (c + 0.5) * g.v[i];
                 });
}

}  // namespace caag::diff
