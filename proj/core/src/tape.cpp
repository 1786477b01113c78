#include "caag/tape.hpp"

#include <algorithm>
#include <cmath>

namespace caag::diff {

namespace {

const Tensor& value_of(Var x) { return x.tape->val(x); }

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape)
    throw Error(std::string(op) + ": operands from different tapes");
}

}  // namespace

Var Tape::input(Tensor value) {
  return make("input", std::move(value), false, nullptr);
}

Var Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second, this};
  Var v = make("param", p.value, true, nullptr);
  nodes_[v.id].bound = &p;
  param_nodes_.emplace(&p, v.id);
  return v;
}

Var Tape::make(const char* op, Tensor val, bool needs_grad, BackFn back) {
  Node n;
  n.val = std::move(val);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  n.op = op;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1), this};
}

void Tape::check(Var x, const char* who) const {
  if (x.tape != this || x.id >= nodes_.size())
    throw Error(std::string(who) + ": variable does not belong to this tape");
}

const Tensor& Tape::val(Var x) const {
  check(x, "val");
  return nodes_[x.id].val;
}

void Tape::accum(std::uint32_t id, std::size_t flat_index, double g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.val.shape);
    n.grad_alloc = true;
  }
  n.grad.v[flat_index] += g;
}

Tensor* Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (!n.grad_alloc) {
    n.grad = Tensor::zeros(n.val.shape);
    n.grad_alloc = true;
  }
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw Error("backward: no forward pass recorded");
  check(loss, "backward");
  Node& top = nodes_[loss.id];
  if (top.val.numel() != 1)
    throw Error("backward: loss must be scalar, got shape " +
                shape_str(top.val.shape));

  // fresh sweep: node grads from any previous backward() are discarded;
  // Parameter grads keep accumulating
  for (Node& n : nodes_) n.grad_alloc = false;

  top.grad = Tensor({1}, {1.0});
  top.grad_alloc = true;

  for (std::uint32_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.grad_alloc || !n.needs_grad) continue;
    if (n.bound != nullptr) {
      Parameter& p = *n.bound;
      for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad.v[i] += n.grad.v[i];
      p.grad_ready = true;
    } else if (n.back) {
      n.back(*this, n.grad);
    }
  }
}

// ---------------------------------------------------------------------------
// ops
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Tensor& A = value_of(a);
  const Tensor& B = value_of(b);
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
    throw Error("matmul: inner dimensions disagree: " + shape_str(A.shape) +
                " vs " + shape_str(B.shape));
  std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor C = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t l = 0; l < k; ++l) {
      double av = A.at(i, l);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) C.at(i, j) += av * B.at(l, j);
    }
  Tape* t = a.tape;
  bool ng = t->needs_grad(a) || t->needs_grad(b);
  return t->make("matmul", std::move(C), ng, [a, b, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (Tensor* ga = t.grad_buffer(a.id)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g.at(i, j) * B.at(l, j);
          ga->at(i, l) += s;
        }
    }
    if (Tensor* gb = t.grad_buffer(b.id)) {
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += A.at(i, l) * g.at(i, j);
          gb->at(l, j) += s;
        }
    }
  });
}

Var matvec(Var a, Var x) {
  require_same_tape(a, x, "matvec");
  const Tensor& A = value_of(a);
  const Tensor& X = value_of(x);
  if (A.rank() != 2 || X.rank() != 1 || A.cols() != X.numel())
    throw Error("matvec: inner dimensions disagree: " + shape_str(A.shape) +
                " vs " + shape_str(X.shape));
  std::size_t m = A.rows(), k = A.cols();
  Tensor y = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t l = 0; l < k; ++l) s += A.at(i, l) * X.at(l);
    y.at(i) = s;
  }
  Tape* t = a.tape;
  bool ng = t->needs_grad(a) || t->needs_grad(x);
  return t->make("matvec", std::move(y), ng, [a, x, m, k](Tape& t, const Tensor& g) {
    const Tensor& A = t.val(a);
    const Tensor& X = t.val(x);
    if (Tensor* ga = t.grad_buffer(a.id)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) ga->at(i, l) += g.at(i) * X.at(l);
    }
    if (Tensor* gx = t.grad_buffer(x.id)) {
      for (std::size_t l = 0; l < k; ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += A.at(i, l) * g.at(i);
        gx->at(l) += s;
      }
    }
  });
}

Var vecmat(Var x, Var a) {
  require_same_tape(x, a, "vecmat");
  const Tensor& X = value_of(x);
  const Tensor& A = value_of(a);
  if (X.rank() != 1 || A.rank() != 2 || X.numel() != A.rows())
    throw Error("vecmat: inner dimensions disagree: " + shape_str(X.shape) +
                " vs " + shape_str(A.shape));
  std::size_t m = A.rows(), n = A.cols();
  Tensor y = Tensor::zeros({n});
  for (std::size_t i = 0; i < m; ++i) {
    double xv = X.at(i);
    for (std::size_t j = 0; j < n; ++j) y.at(j) += xv * A.at(i, j);
  }
  Tape* t = x.tape;
  bool ng = t->needs_grad(x) || t->needs_grad(a);
  return t->make("vecmat", std::move(y), ng, [x, a, m, n](Tape& t, const Tensor& g) {
    const Tensor& X = t.val(x);
    const Tensor& A = t.val(a);
    if (Tensor* gx = t.grad_buffer(x.id)) {
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += A.at(i, j) * g.at(j);
        gx->at(i) += s;
      }
    }
    if (Tensor* ga = t.grad_buffer(a.id)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga->at(i, j) += X.at(i) * g.at(j);
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = value_of(a);
  if (A.rank() != 2)
    throw Error("transpose: expected rank-2, got " + shape_str(A.shape));
  std::size_t m = A.rows(), n = A.cols();
  Tensor T = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) T.at(j, i) = A.at(i, j);
  Tape* t = a.tape;
  return t->make("transpose", std::move(T), t->needs_grad(a),
                 [a, m, n](Tape& t, const Tensor& g) {
                   if (Tensor* ga = t.grad_buffer(a.id)) {
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j)
                         ga->at(i, j) += g.at(j, i);
                   }
                 });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  const Tensor& A = value_of(a);
  const Tensor& B = value_of(b);
  require_same_shape(A, B, "add");
  Tensor C = A;
  for (std::size_t i = 0; i < C.numel(); ++i) C.v[i] += B.v[i];
  Tape* t = a.tape;
  bool ng = t->needs_grad(a) || t->needs_grad(b);
  return t->make("add", std::move(C), ng, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.numel(); ++i) ga->v[i] += g.v[i];
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.numel(); ++i) gb->v[i] += g.v[i];
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  const Tensor& A = value_of(a);
  const Tensor& B = value_of(b);
  require_same_shape(A, B, "sub");
  Tensor C = A;
  for (std::size_t i = 0; i < C.numel(); ++i) C.v[i] -= B.v[i];
  Tape* t = a.tape;
  bool ng = t->needs_grad(a) || t->needs_grad(b);
  return t->make("sub", std::move(C), ng, [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.numel(); ++i) ga->v[i] += g.v[i];
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.numel(); ++i) gb->v[i] -= g.v[i];
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  const Tensor& A = value_of(a);
  const Tensor& B = value_of(b);
  require_same_shape(A, B, "mul");
  Tensor C = A;
  for (std::size_t i = 0; i < C.numel(); ++i) C.v[i] *= B.v[i];
  Tape* t = a.tape;
  bool ng = t->needs_grad(a) || t->needs_grad(b);
  return t->make("mul", std::move(C), ng, [a, b](Tape& t, const Tensor& g) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (Tensor* ga = t.grad_buffer(a.id))
      for (std::size_t i = 0; i < g.numel(); ++i) ga->v[i] += g.v[i] * B.v[i];
    if (Tensor* gb = t.grad_buffer(b.id))
      for (std::size_t i = 0; i < g.numel(); ++i) gb->v[i] += g.v[i] * A.v[i];
  });
}

Var scale(Var a, double c) {
  Tensor C = value_of(a);
  for (double& x : C.v) x *= c;
  Tape* t = a.tape;
  return t->make("scale", std::move(C), t->needs_grad(a),
                 [a, c](Tape& t, const Tensor& g) {
                   if (Tensor* ga = t.grad_buffer(a.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       ga->v[i] += c * g.v[i];
                 });
}

Var add_rowvec(Var m, Var v) {
  require_same_tape(m, v, "add_rowvec");
  const Tensor& M = value_of(m);
  const Tensor& V = value_of(v);
  if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.numel())
    throw Error("add_rowvec: shape mismatch " + shape_str(M.shape) + " vs " +
                shape_str(V.shape));
  std::size_t r = M.rows(), c = M.cols();
  Tensor C = M;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) C.at(i, j) += V.at(j);
  Tape* t = m.tape;
  bool ng = t->needs_grad(m) || t->needs_grad(v);
  return t->make("add_rowvec", std::move(C), ng, [m, v, r, c](Tape& t, const Tensor& g) {
    if (Tensor* gm = t.grad_buffer(m.id))
      for (std::size_t i = 0; i < g.numel(); ++i) gm->v[i] += g.v[i];
    if (Tensor* gv = t.grad_buffer(v.id)) {
      for (std::size_t j = 0; j < c; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < r; ++i) s += g.at(i, j);
        gv->at(j) += s;
      }
    }
  });
}

Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw Error("concat: no inputs");
  Tape* t = xs[0].tape;
  std::size_t total = 0;
  bool ng = false;
  for (Var x : xs) {
    require_same_tape(xs[0], x, "concat");
    const Tensor& X = value_of(x);
    if (X.rank() != 1)
      throw Error("concat: expected rank-1 inputs, got " + shape_str(X.shape));
    total += X.numel();
    ng = ng || t->needs_grad(x);
  }
  Tensor C = Tensor::zeros({total});
  std::size_t off = 0;
  for (Var x : xs) {
    const Tensor& X = value_of(x);
    std::copy(X.v.begin(), X.v.end(), C.v.begin() + off);
    off += X.numel();
  }
  std::vector<Var> parts = xs;
  return t->make("concat", std::move(C), ng, [parts](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (Var x : parts) {
      std::size_t n = t.val(x).numel();
      if (Tensor* gx = t.grad_buffer(x.id))
        for (std::size_t i = 0; i < n; ++i) gx->v[i] += g.v[off + i];
      off += n;
    }
  });
}

Var slice(Var x, std::size_t start, std::size_t len) {
  const Tensor& X = value_of(x);
  if (X.rank() != 1 || start + len > X.numel())
    throw Error("slice: range [" + std::to_string(start) + ", " +
                std::to_string(start + len) + ") out of bounds for " +
                shape_str(X.shape));
  Tensor Y = Tensor::zeros({len});
  std::copy(X.v.begin() + start, X.v.begin() + start + len, Y.v.begin());
  Tape* t = x.tape;
  return t->make("slice", std::move(Y), t->needs_grad(x),
                 [x, start, len](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < len; ++i)
                       gx->v[start + i] += g.v[i];
                 });
}

Var vtanh(Var x) {
  Tensor Y = value_of(x);
  for (double& v : Y.v) v = std::tanh(v);
  Tape* t = x.tape;
  Tensor saved = Y;
  return t->make("tanh", std::move(Y), t->needs_grad(x),
                 [x, saved](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       gx->v[i] += g.v[i] * (1.0 - saved.v[i] * saved.v[i]);
                 });
}

namespace {
double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var vsigmoid(Var x) {
  Tensor Y = value_of(x);
  for (double& v : Y.v) v = stable_sigmoid(v);
  Tape* t = x.tape;
  Tensor saved = Y;
  return t->make("sigmoid", std::move(Y), t->needs_grad(x),
                 [x, saved](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       gx->v[i] += g.v[i] * saved.v[i] * (1.0 - saved.v[i]);
                 });
}

Var log_floor(Var x, double floor) {
  const Tensor& X = value_of(x);
  Tensor Y = X;
  for (double& v : Y.v) v = std::log(std::max(v, floor));
  Tape* t = x.tape;
  return t->make("log_floor", std::move(Y), t->needs_grad(x),
                 [x, floor](Tape& t, const Tensor& g) {
                   const Tensor& X = t.val(x);
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       if (X.v[i] > floor) gx->v[i] += g.v[i] / X.v[i];
                 });
}

Var softmax(Var x) {
  const Tensor& X = value_of(x);
  if (X.rank() != 1 || X.numel() == 0)
    throw Error("softmax: expected non-empty vector, got " + shape_str(X.shape));
  Tensor Y = X;
  double mx = *std::max_element(Y.v.begin(), Y.v.end());
  double total = 0.0;
  for (double& v : Y.v) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : Y.v) v /= total;
  Tape* t = x.tape;
  Tensor saved = Y;
  return t->make("softmax", std::move(Y), t->needs_grad(x),
                 [x, saved](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id)) {
                     double dot = 0.0;
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       dot += g.v[i] * saved.v[i];
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       gx->v[i] += saved.v[i] * (g.v[i] - dot);
                   }
                 });
}

Var mask_fill(Var x, const std::vector<bool>& mask, double fill) {
  const Tensor& X = value_of(x);
  if (mask.size() != X.numel())
    throw Error("mask_fill: mask length " + std::to_string(mask.size()) +
                " does not match " + shape_str(X.shape));
  Tensor Y = X;
  for (std::size_t i = 0; i < Y.numel(); ++i)
    if (mask[i]) Y.v[i] = fill;
  Tape* t = x.tape;
  std::vector<bool> m = mask;
  return t->make("mask_fill", std::move(Y), t->needs_grad(x),
                 [x, m](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < g.numel(); ++i)
                       if (!m[i]) gx->v[i] += g.v[i];
                 });
}

Var masked_softmax(Var x, const std::vector<bool>& mask) {
  bool any_open = false;
  for (bool b : mask)
    if (!b) any_open = true;
  if (!any_open) throw Error("masked_softmax: all positions masked");
  return mask_fill(softmax(mask_fill(x, mask, -1e9)), mask, 0.0);
}

Var rows(Var table, const std::vector<int>& ids) {
  const Tensor& T = value_of(table);
  if (T.rank() != 2)
    throw Error("rows: expected rank-2 table, got " + shape_str(T.shape));
  std::size_t n = ids.size(), d = T.cols();
  for (std::size_t i = 0; i < n; ++i)
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= T.rows())
      throw Error("rows: id " + std::to_string(ids[i]) + " at position " +
                  std::to_string(i) + " out of range (table has " +
                  std::to_string(T.rows()) + " rows)");
  Tensor Y = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i)
    std::copy(T.v.begin() + ids[i] * d, T.v.begin() + (ids[i] + 1) * d,
              Y.v.begin() + i * d);
  Tape* t = table.tape;
  std::vector<int> saved = ids;
  return t->make("rows", std::move(Y), t->needs_grad(table),
                 [table, saved, d](Tape& t, const Tensor& g) {
                   if (Tensor* gt = t.grad_buffer(table.id))
                     for (std::size_t i = 0; i < saved.size(); ++i)
                       for (std::size_t j = 0; j < d; ++j)
                         gt->v[saved[i] * d + j] += g.v[i * d + j];
                 });
}

Var row(Var table, int id) {
  const Tensor& T = value_of(table);
  if (T.rank() != 2)
    throw Error("row: expected rank-2 table, got " + shape_str(T.shape));
  if (id < 0 || static_cast<std::size_t>(id) >= T.rows())
    throw Error("row: id " + std::to_string(id) + " out of range (table has " +
                std::to_string(T.rows()) + " rows)");
  std::size_t d = T.cols();
  Tensor Y = Tensor::zeros({d});
  std::copy(T.v.begin() + id * d, T.v.begin() + (id + 1) * d, Y.v.begin());
  Tape* t = table.tape;
  return t->make("row", std::move(Y), t->needs_grad(table),
                 [table, id, d](Tape& t, const Tensor& g) {
                   if (Tensor* gt = t.grad_buffer(table.id))
                     for (std::size_t j = 0; j < d; ++j)
                       gt->v[id * d + j] += g.v[j];
                 });
}

Var mean_rows(Var m) {
  const Tensor& M = value_of(m);
  if (M.rank() != 2 || M.rows() == 0)
    throw Error("mean_rows: expected non-empty rank-2, got " + shape_str(M.shape));
  std::size_t r = M.rows(), c = M.cols();
  Tensor Y = Tensor::zeros({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) Y.at(j) += M.at(i, j);
  for (double& v : Y.v) v /= static_cast<double>(r);
  Tape* t = m.tape;
  return t->make("mean_rows", std::move(Y), t->needs_grad(m),
                 [m, r, c](Tape& t, const Tensor& g) {
                   if (Tensor* gm = t.grad_buffer(m.id)) {
                     double inv = 1.0 / static_cast<double>(r);
                     for (std::size_t i = 0; i < r; ++i)
                       for (std::size_t j = 0; j < c; ++j)
                         gm->at(i, j) += g.at(j) * inv;
                   }
                 });
}

Var sum(Var x) {
  const Tensor& X = value_of(x);
  double s = 0.0;
  for (double v : X.v) s += v;
  Tape* t = x.tape;
  return t->make("sum", Tensor::scalar(s), t->needs_grad(x),
                 [x](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id))
                     for (std::size_t i = 0; i < gx->numel(); ++i)
                       gx->v[i] += g.v[0];
                 });
}

Var pick(Var x, std::size_t i) {
  const Tensor& X = value_of(x);
  if (X.rank() != 1 || i >= X.numel())
    throw Error("pick: index " + std::to_string(i) + " out of bounds for " +
                shape_str(X.shape));
  Tape* t = x.tape;
  return t->make("pick", Tensor::scalar(X.at(i)), t->needs_grad(x),
                 [x, i](Tape& t, const Tensor& g) {
                   if (Tensor* gx = t.grad_buffer(x.id)) gx->v[i] += g.v[0];
                 });
}

Var detach(Var x) {
  return x.tape->make("detach", value_of(x), false, nullptr);
}

}  // namespace caag::diff
