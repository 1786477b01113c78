#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "caag/rng.hpp"
#include "caag/tensor.hpp"

namespace caag::diff {

/// A named, trainable tensor that lives outside any single computation
/// graph. Gradients accumulate additively across backward() calls until
/// explicitly zeroed.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool grad_ready = false;  // backward (or zero_grad) has populated grad

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::zeros(value.shape);
  }

  void zero_grad() {
    grad.fill(0.0);
    grad_ready = false;
  }

  void init_uniform(Rng& rng, double lo = -0.1, double hi = 0.1) {
    for (double& x : value.v) x = rng.uniform(lo, hi);
  }
};

class Tape;

/// Handle to a node in a Tape. Cheap to copy; only valid while the Tape is
/// alive.
struct Var {
  std::uint32_t id = 0;
  Tape* tape = nullptr;

  bool valid() const { return tape != nullptr; }
};

/// Reverse-mode automatic differentiation tape. Records ops in forward
/// (topological) order; backward() sweeps the records exactly once in
/// reverse. A Tape and its Vars are confined to one thread.
class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Constant leaf; no gradient flows into it.
  Var input(Tensor value);

  /// Differentiable leaf bound to a Parameter. Repeated calls with the same
  /// Parameter return the same node.
  Var param(Parameter& p);

  const Tensor& val(Var x) const;

  /// Reverse sweep from a scalar loss. Accumulates into Parameter::grad of
  /// every parameter reachable from the loss (additively; zeroing is the
  /// caller's job).
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // --- op-builder interface (used by the free functions below) ---
  using BackFn = std::function<void(Tape&, const Tensor& gout)>;
  Var make(const char* op, Tensor val, bool needs_grad, BackFn back);
  bool needs_grad(Var x) const { return nodes_[x.id].needs_grad; }
  /// Accumulate a single element into a node's gradient; no-op when the node
  /// does not require gradients.
  void accum(std::uint32_t id, std::size_t flat_index, double g);
  Tensor* grad_buffer(std::uint32_t id);

private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool grad_alloc = false;
    bool needs_grad = false;
    Parameter* bound = nullptr;
    BackFn back;
    const char* op = "";
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;

  void check(Var x, const char* who) const;
};

// ---------------------------------------------------------------------------
// Operations. Each records the correct backward rule on the tape.
// ---------------------------------------------------------------------------

/// C[m x n] = A[m x k] * B[k x n]
Var matmul(Var a, Var b);
/// y[m] = A[m x k] * x[k]
Var matvec(Var a, Var x);
/// y[n] = x[m]^T * A[m x n]
Var vecmat(Var x, Var a);
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
/// M[r x c] + broadcast row vector v[c]
Var add_rowvec(Var m, Var v);

Var concat(const std::vector<Var>& xs);
Var slice(Var x, std::size_t start, std::size_t len);

Var vtanh(Var x);
Var vsigmoid(Var x);
/// log(max(x, floor)) elementwise; gradient is zero where the floor engages.
Var log_floor(Var x, double floor = 1e-12);

/// Numerically stable softmax over a vector (max subtraction).
Var softmax(Var x);
/// x with mask==true positions replaced by `fill`; zero gradient flows into
/// masked positions.
Var mask_fill(Var x, const std::vector<bool>& mask, double fill);

/// Row gather: out[i, :] = table[ids[i], :]. Backward scatter-adds.
Var rows(Var table, const std::vector<int>& ids);
Var row(Var table, int id);
Var mean_rows(Var m);

Var sum(Var x);
Var pick(Var x, std::size_t i);

/// Value passes through; gradient does not.
Var detach(Var x);

/// Softmax restricted to unmasked positions: the -1e9 fill is applied before
/// softmax and masked outputs are hard-zeroed afterwards, so the result is
/// bitwise independent of masked inputs.
Var masked_softmax(Var x, const std::vector<bool>& mask);

}  // namespace caag::diff
