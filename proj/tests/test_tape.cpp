#include <doctest.h>

#include <cmath>

#include "caag/adam.hpp"
#include "caag/gradcheck.hpp"
#include "caag/rng.hpp"
#include "caag/tape.hpp"

using namespace caag;
using namespace caag::diff;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("matmul: identity and scalar cases") {
  Rng rng(1);
  Tape t;
  Tensor id3 = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) id3.at(i, i) = 1.0;
  Tensor x = random_tensor({3, 4}, rng);

  Var prod = matmul(t.input(id3), t.input(x));
  for (std::size_t i = 0; i < x.numel(); ++i)
    CHECK(t.val(prod).v[i] == x.v[i]);

  Var s = matmul(t.input(Tensor({1, 1}, {2.0})), t.input(Tensor({1, 1}, {3.0})));
  CHECK(t.val(s).at(0) == 6.0);
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tape t;
  Var a = t.input(Tensor::zeros({2, 3}));
  Var b = t.input(Tensor::zeros({4, 2}));
  try {
    matmul(a, b);
    FAIL("expected a dimension error");
  } catch (const Error& e) {
    std::string w = e.what();
    CHECK(w.find("[2 x 3]") != std::string::npos);
    CHECK(w.find("[4 x 2]") != std::string::npos);
  }
}

TEST_CASE("matmul: gradient matches central finite differences") {
  Rng rng(2);
  Parameter a("a", random_tensor({4, 5}, rng));
  Parameter b("b", random_tensor({5, 3}, rng));
  FdReport rep = fd_check({&a, &b}, [&](bool g) {
    Tape t;
    Var loss = sum(matmul(t.param(a), t.param(b)));
    if (g) t.backward(loss);
    return t.val(loss).at(0);
  });
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("softmax: symmetry, frozen values, shift invariance") {
  Tape t;
  Var u = softmax(t.input(Tensor::vec({0.0, 0.0, 0.0})));
  for (double p : t.val(u).v) CHECK(p == 1.0 / 3.0);

  // high-precision oracle values for softmax([1,2,3])
  Var s = softmax(t.input(Tensor::vec({1.0, 2.0, 3.0})));
  CHECK(t.val(s).at(0) == doctest::Approx(0.09003057317038046).epsilon(1e-10));
  CHECK(t.val(s).at(1) == doctest::Approx(0.24472847105479764).epsilon(1e-10));
  CHECK(t.val(s).at(2) == doctest::Approx(0.66524095577482190).epsilon(1e-10));

  Rng rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor x = random_tensor({6}, rng, -3.0, 3.0);
    double c = rng.uniform(-10.0, 10.0);
    Tensor xc = x;
    for (double& v : xc.v) v += c;
    Var p = softmax(t.input(x));
    Var pc = softmax(t.input(xc));
    double total = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::fabs(t.val(p).at(i) - t.val(pc).at(i)) < 1e-12);
      CHECK(t.val(p).at(i) > 0.0);
      total += t.val(p).at(i);
    }
    CHECK(std::fabs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("softmax: empty input rejected") {
  Tape t;
  Var e = t.input(Tensor::zeros({0}));
  CHECK_THROWS_AS(softmax(e), Error);
}

TEST_CASE("elementwise: values") {
  Tape t;
  Var th = vtanh(t.input(Tensor::vec({0.0})));
  CHECK(t.val(th).at(0) == 0.0);
  Var sg = vsigmoid(t.input(Tensor::vec({0.0})));
  CHECK(t.val(sg).at(0) == 0.5);

  Var mf = mask_fill(t.input(Tensor::vec({1.0, 2.0, 3.0})),
                     {false, true, false}, -1e9);
  CHECK(t.val(mf).at(0) == 1.0);
  CHECK(t.val(mf).at(1) == -1e9);
  CHECK(t.val(mf).at(2) == 3.0);
}

TEST_CASE("elementwise: every kind passes finite differences") {
  Rng rng(4);
  Parameter x("x", random_tensor({5}, rng));
  Parameter y("y", random_tensor({5}, rng));

  auto check = [&](const char* tag, std::function<Var(Tape&)> build) {
    INFO(tag);
    FdReport rep = fd_check({&x, &y}, [&](bool g) {
      Tape t;
      Var loss = build(t);
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    });
    CHECK(rep.max_rel < 1e-4);
  };

  check("tanh", [&](Tape& t) { return sum(vtanh(t.param(x))); });
  check("sigmoid", [&](Tape& t) { return sum(vsigmoid(t.param(x))); });
  check("add", [&](Tape& t) { return sum(mul(add(t.param(x), t.param(y)), t.param(y))); });
  check("mul", [&](Tape& t) { return sum(mul(t.param(x), t.param(y))); });
  check("concat", [&](Tape& t) {
    Var c = concat({t.param(x), t.param(y)});
    return sum(mul(c, c));
  });
  check("mask_fill", [&](Tape& t) {
    return sum(mul(mask_fill(t.param(x), {true, false, false, true, false}, 2.0),
                   t.param(y)));
  });
}

TEST_CASE("mask_fill: masked positions receive zero gradient") {
  Rng rng(5);
  Parameter x("x", random_tensor({4}, rng));
  x.zero_grad();
  Tape t;
  Var loss = sum(mask_fill(t.param(x), {false, true, true, false}, 7.0));
  t.backward(loss);
  CHECK(x.grad.at(0) == 1.0);
  CHECK(x.grad.at(1) == 0.0);
  CHECK(x.grad.at(2) == 0.0);
  CHECK(x.grad.at(3) == 1.0);
}

TEST_CASE("backward: sum gives all-ones gradient, zero scale gives zeros") {
  Rng rng(6);
  Parameter p("p", random_tensor({3, 4}, rng));
  p.zero_grad();
  {
    Tape t;
    t.backward(sum(t.param(p)));
    for (double g : p.grad.v) CHECK(g == 1.0);
  }
  p.zero_grad();
  {
    Tape t;
    t.backward(scale(sum(t.param(p)), 0.0));
    for (double g : p.grad.v) CHECK(g == 0.0);
  }
}

TEST_CASE("backward: error paths") {
  Tape t;
  CHECK_THROWS_AS(t.backward(Var{0, &t}), Error);  // nothing recorded
  Rng rng(7);
  Var m = t.input(random_tensor({2, 2}, rng));
  CHECK_THROWS_AS(t.backward(m), Error);  // non-scalar loss
}

TEST_CASE("backward: gradients accumulate additively until zeroed") {
  Parameter p("p", Tensor::vec({1.0, 2.0}));
  p.zero_grad();
  for (int i = 0; i < 3; ++i) {
    Tape t;
    t.backward(sum(t.param(p)));
  }
  CHECK(p.grad.at(0) == 3.0);
  CHECK(p.grad.at(1) == 3.0);
  p.zero_grad();
  CHECK(p.grad.at(0) == 0.0);
  CHECK_FALSE(p.grad_ready);
}

TEST_CASE("forward passes are bitwise deterministic") {
  Rng rng(8);
  Tensor a = random_tensor({6, 6}, rng);
  Tensor b = random_tensor({6}, rng);
  auto run = [&]() {
    Tape t;
    Var out = softmax(matvec(vtanh(t.input(a)), vsigmoid(t.input(b))));
    return t.val(out);
  };
  Tensor r1 = run(), r2 = run();
  for (std::size_t i = 0; i < r1.numel(); ++i) CHECK(r1.v[i] == r2.v[i]);
}

TEST_CASE("plumbing ops: composite finite-difference check") {
  Rng rng(9);
  Parameter table("table", random_tensor({5, 3}, rng));
  Parameter q("q", random_tensor({3}, rng));
  FdReport rep = fd_check({&table, &q}, [&](bool g) {
    Tape t;
    Var rows_v = rows(t.param(table), {1, 4, 1});
    Var ctx = vecmat(softmax(matvec(rows_v, t.param(q))), rows_v);
    Var tr = matvec(transpose(t.param(table)), slice(concat({ctx, t.param(q)}), 0, 5));
    Var m = mean_rows(add_rowvec(t.param(table), sub(ctx, t.param(q))));
    Var loss = add(add(sum(tr), pick(m, 1)), log_floor(pick(softmax(ctx), 0)));
    if (g) t.backward(loss);
    return t.val(loss).at(0);
  });
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("detach stops gradient flow") {
  Parameter p("p", Tensor::vec({2.0, 3.0}));
  p.zero_grad();
  Tape t;
  Var stopped = detach(t.param(p));
  Var live = t.param(p);
  t.backward(add(sum(stopped), scale(sum(live), 2.0)));
  // only the live path contributes
  for (double g : p.grad.v) CHECK(g == 2.0);
}

TEST_CASE("adam: hand-evaluated first step") {
  Parameter p("p", Tensor::vec({1.0}));
  Adam opt({&p}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  p.grad.at(0) = 1.0;
  p.grad_ready = true;
  opt.step();
  // frozen from the exact update rule: 1 - 0.1/(1 + 1e-8)
  CHECK(p.value.at(0) == doctest::Approx(0.900000001).epsilon(1e-9));
  CHECK(p.grad.at(0) == 0.0);  // grads zeroed by the step
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Parameter p("p", Tensor::vec({1.5, -2.5}));
  Adam opt({&p}, AdamConfig{});
  p.zero_grad();
  p.grad_ready = true;
  opt.step();
  CHECK(p.value.at(0) == 1.5);
  CHECK(p.value.at(1) == -2.5);
}

TEST_CASE("adam: missing gradient is an error") {
  Parameter p("p", Tensor::vec({1.0}));
  Adam opt({&p}, AdamConfig{});
  try {
    opt.step();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("'p'") != std::string::npos);
  }
}

TEST_CASE("adam: minimizes a quadratic to the known optimum") {
  Parameter p("p", Tensor::vec({0.0}));
  Adam opt({&p}, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 100; ++i) {
    p.zero_grad();
    Tape t;
    Var d = sub(t.param(p), t.input(Tensor::vec({3.0})));
    t.backward(mul(d, d));
    opt.step();
  }
  CHECK(std::fabs(p.value.at(0) - 3.0) < 0.05);
}

TEST_CASE("clip_global_norm scales gradients above the threshold") {
  Parameter p("p", Tensor::vec({0.0, 0.0}));
  p.grad.at(0) = 3.0;
  p.grad.at(1) = 4.0;
  double norm = clip_global_norm({&p}, 2.5);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(std::hypot(p.grad.at(0), p.grad.at(1)) == doctest::Approx(2.5));
}

TEST_CASE("gradcheck flags a corrupted backward rule") {
  Parameter x("x", Tensor::vec({0.5, -0.25, 1.0}));
  FdReport rep = fd_check({&x}, [&](bool g) {
    Tape t;
    Var loss = sum(corrupted_scale(t.param(x), 2.0));
    if (g) t.backward(loss);
    return t.val(loss).at(0);
  });
  CHECK(rep.max_rel > 1e-2);
}

TEST_CASE("rng: state round-trip continues the exact stream") {
  Rng a(42);
  a.gaussian();  // leave a spare in the cache
  std::string s = a.state();
  Rng b(0);
  b.set_state(s);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.gaussian() == b.gaussian());
  }
}
