#include <doctest.h>

#include <cmath>

#include "caag/updown.hpp"
#include "caag/vocab.hpp"

using namespace caag;
using namespace caag::diff;
using namespace caag::updown;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

model::Model tiny_model(std::uint64_t seed) {
  model::Model m(model::Dims{10, 8, 4, 8, 4});
  Rng rng(seed);
  m.init_primary(rng);
  m.init_aux(rng);
  return m;
}

// ---------------------------------------------------------------------------
// straight-line re-evaluation of one primary decode step with plain loops:
// LSTM1 over [x ; h2 ; v_mean], additive attention, LSTM2 over [v_hat ; h1],
// linear + softmax. Independent of the tape implementation.
// ---------------------------------------------------------------------------

struct OracleState {
  std::vector<double> h1, c1, h2, c2;
};

struct OracleStep {
  std::vector<double> p1, alpha, h1, c1, h2, c2;
};

std::vector<double> oracle_lstm(const nn::LSTMCell& cell,
                                const std::vector<double>& input,
                                const std::vector<double>& h,
                                const std::vector<double>& c,
                                std::vector<double>* c_out) {
  std::size_t H = cell.hidden_width;
  std::vector<double> z(4 * H);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    double acc = cell.b.value.v[r];
    for (std::size_t k = 0; k < input.size(); ++k)
      acc += cell.w_ih.value.at(r, k) * input[k];
    for (std::size_t k = 0; k < H; ++k) acc += cell.w_hh.value.at(r, k) * h[k];
    z[r] = acc;
  }
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  std::vector<double> hn(H), cn(H);
  for (std::size_t j = 0; j < H; ++j) {
    double i = sig(z[j]);
    double f = sig(z[H + j]);
    double g = std::tanh(z[2 * H + j]);
    double o = sig(z[3 * H + j]);
    cn[j] = f * c[j] + i * g;
    hn[j] = o * std::tanh(cn[j]);
  }
  *c_out = cn;
  return hn;
}

OracleStep oracle_primary_step(model::Model& m, int prev, const OracleState& st,
                               const Tensor& V) {
  std::size_t d_e = m.dims.d_e, d_h = m.dims.d_h, d_i = m.dims.d_i;
  std::size_t k = V.rows(), vocab = m.dims.vocab;

  std::vector<double> vbar(d_i, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < d_i; ++j) vbar[j] += V.at(i, j) / double(k);

  std::vector<double> in1;
  for (std::size_t j = 0; j < d_e; ++j) in1.push_back(m.embed.table.value.at(prev, j));
  for (double x : st.h2) in1.push_back(x);
  for (double x : vbar) in1.push_back(x);

  OracleStep out;
  out.h1 = oracle_lstm(m.lstm_attn, in1, st.h1, st.c1, &out.c1);

  // visual attention over the k regions
  std::size_t d_a = m.dims.d_a;
  std::vector<double> u(k);
  for (std::size_t i = 0; i < k; ++i) {
    double score = 0.0;
    for (std::size_t a = 0; a < d_a; ++a) {
      double pre = 0.0;
      for (std::size_t j = 0; j < d_i; ++j)
        pre += m.att_visual.w_key.value.at(a, j) * V.at(i, j);
      for (std::size_t j = 0; j < d_h; ++j)
        pre += m.att_visual.w_query.value.at(a, j) * out.h1[j];
      score += m.att_visual.v.value.at(a) * std::tanh(pre);
    }
    u[i] = score;
  }
  double denom = 0.0;
  for (double x : u) denom += std::exp(x);
  out.alpha.resize(k);
  std::vector<double> vhat(d_i, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    out.alpha[i] = std::exp(u[i]) / denom;
    for (std::size_t j = 0; j < d_i; ++j) vhat[j] += out.alpha[i] * V.at(i, j);
  }

  std::vector<double> in2 = vhat;
  for (double x : out.h1) in2.push_back(x);
  out.h2 = oracle_lstm(m.lstm_lang, in2, st.h2, st.c2, &out.c2);

  std::vector<double> logits(vocab);
  for (std::size_t r = 0; r < vocab; ++r) {
    double acc = m.out_primary.b.value.v[r];
    for (std::size_t j = 0; j < d_h; ++j)
      acc += m.out_primary.w.value.at(r, j) * out.h2[j];
    logits[r] = acc;
  }
  double z = 0.0;
  for (double x : logits) z += std::exp(x);
  out.p1.resize(vocab);
  for (std::size_t r = 0; r < vocab; ++r) out.p1[r] = std::exp(logits[r]) / z;
  return out;
}

}  // namespace

TEST_CASE("mean_pool: single region and the 2x2 example") {
  Tape t;
  Rng rng(1);
  Tensor one = random_tensor({1, 5}, rng);
  Var mp = mean_pool(t, t.input(one));
  for (std::size_t j = 0; j < 5; ++j) CHECK(t.val(mp).at(j) == one.at(0, j));

  Var two = mean_pool(t, t.input(Tensor({2, 2}, {1.0, 3.0, 3.0, 1.0})));
  CHECK(t.val(two).at(0) == 2.0);
  CHECK(t.val(two).at(1) == 2.0);
}

TEST_CASE("mean_pool: random matrix matches independent summation") {
  Rng rng(2);
  Tensor m = random_tensor({5, 8}, rng);
  Tape t;
  Var mp = mean_pool(t, t.input(m));
  for (std::size_t j = 0; j < 8; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += m.at(i, j);
    CHECK(std::fabs(t.val(mp).at(j) - s / 5.0) < 1e-12);
  }
}

TEST_CASE("primary_step: single region forces alpha = [1.0]") {
  model::Model m = tiny_model(3);
  Rng rng(4);
  Tensor V = random_tensor({1, 4}, rng);
  Tape t;
  Var feats = t.input(V);
  StepVars sv = primary_step(t, m, 4, zero_state(t, 8), feats, mean_pool(t, feats));
  CHECK(t.val(sv.alpha).numel() == 1);
  CHECK(t.val(sv.alpha).at(0) == 1.0);
}

TEST_CASE("primary_step: p1 is a valid distribution for random parameters") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    model::Model m = tiny_model(100 + trial);
    Tensor V = random_tensor({3, 4}, rng);
    Tape t;
    Var feats = t.input(V);
    StepVars sv =
        primary_step(t, m, trial, zero_state(t, 8), feats, mean_pool(t, feats));
    double total = 0.0;
    for (double p : t.val(sv.p1).v) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::fabs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("primary_step: all-zero parameters give a uniform distribution") {
  model::Model m(model::Dims{10, 8, 4, 8, 4});  // never initialized -> zeros
  Rng rng(6);
  Tensor V = random_tensor({2, 4}, rng);
  Tape t;
  Var feats = t.input(V);
  StepVars sv = primary_step(t, m, 0, zero_state(t, 8), feats, mean_pool(t, feats));
  for (double p : t.val(sv.p1).v) CHECK(p == 0.1);
}

TEST_CASE("primary_step: matches the straight-line formula oracle") {
  model::Model m = tiny_model(7);
  Rng rng(8);
  Tensor V = random_tensor({3, 4}, rng);

  OracleState ost{std::vector<double>(8, 0.0), std::vector<double>(8, 0.0),
                  std::vector<double>(8, 0.0), std::vector<double>(8, 0.0)};
  int prev = corpus::kBos;
  for (int step = 0; step < 3; ++step) {
    Tape t;
    Var feats = t.input(V);
    StateVars st{t.input(Tensor::vec(ost.h1)), t.input(Tensor::vec(ost.c1)),
                 t.input(Tensor::vec(ost.h2)), t.input(Tensor::vec(ost.c2))};
    StepVars sv = primary_step(t, m, prev, st, feats, mean_pool(t, feats));
    OracleStep expect = oracle_primary_step(m, prev, ost, V);

    for (std::size_t i = 0; i < 10; ++i)
      CHECK(std::fabs(t.val(sv.p1).at(i) - expect.p1[i]) < 1e-10);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(std::fabs(t.val(sv.alpha).at(i) - expect.alpha[i]) < 1e-10);
    for (std::size_t j = 0; j < 8; ++j)
      CHECK(std::fabs(t.val(sv.state.h2).at(j) - expect.h2[j]) < 1e-10);

    ost = OracleState{expect.h1, expect.c1, expect.h2, expect.c2};
    prev = 3 + step;
  }
}

TEST_CASE("teacher_forced_rollout: minimal sequence runs one step") {
  model::Model m = tiny_model(9);
  Rng rng(10);
  Tape t;
  Var feats = t.input(random_tensor({2, 4}, rng));
  Rollout ro = teacher_forced_rollout(t, m, feats,
                                      {corpus::kBos, corpus::kEos}, 16);
  CHECK(ro.p1.size() == 1);
  CHECK(ro.h2.size() == 1);
}

TEST_CASE("teacher_forced_rollout: causality, later tokens cannot reach earlier steps") {
  model::Model m = tiny_model(11);
  Rng rng(12);
  Tensor V = random_tensor({3, 4}, rng);
  std::vector<int> gt = {corpus::kBos, 4, 5, 6, corpus::kEos};
  std::vector<int> gt_perturbed = {corpus::kBos, 4, 5, 9, 7};

  Tape t1, t2;
  Rollout a = teacher_forced_rollout(t1, m, t1.input(V), gt, 16);
  Rollout b = teacher_forced_rollout(t2, m, t2.input(V), gt_perturbed, 16);
  // steps 0..2 condition on BOS, 4, 5 in both; outputs must match bitwise
  for (int step = 0; step < 3; ++step)
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(t1.val(a.p1[step]).at(i) == t2.val(b.p1[step]).at(i));
}

TEST_CASE("teacher_forced_rollout: equals repeated primary_step calls bitwise") {
  model::Model m = tiny_model(13);
  Rng rng(14);
  Tensor V = random_tensor({2, 4}, rng);
  std::vector<int> gt = {corpus::kBos, 7, 8, corpus::kEos};

  Tape tr;
  Rollout ro = teacher_forced_rollout(tr, m, tr.input(V), gt, 16);

  Tape ts;
  Var feats = ts.input(V);
  Var vbar = mean_pool(ts, feats);
  StateVars st = zero_state(ts, 8);
  for (std::size_t step = 0; step + 1 < gt.size(); ++step) {
    StepVars sv = primary_step(ts, m, gt[step], st, feats, vbar);
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(ts.val(sv.p1).at(i) == tr.val(ro.p1[step]).at(i));
    st = sv.state;
  }
}

TEST_CASE("teacher_forced_rollout: rejects over-length and malformed sequences") {
  model::Model m = tiny_model(15);
  Rng rng(16);
  Tape t;
  Var feats = t.input(random_tensor({2, 4}, rng));
  std::vector<int> too_long(18, 5);
  too_long[0] = corpus::kBos;
  CHECK_THROWS_AS(teacher_forced_rollout(t, m, feats, too_long, 16), Error);
  CHECK_THROWS_AS(teacher_forced_rollout(t, m, feats, {corpus::kBos}, 16), Error);
  CHECK_THROWS_AS(teacher_forced_rollout(t, m, feats, {4, 5}, 16), Error);
}

TEST_CASE("primary_step: invalid token id is rejected") {
  model::Model m = tiny_model(17);
  Rng rng(18);
  Tape t;
  Var feats = t.input(random_tensor({2, 4}, rng));
  CHECK_THROWS_AS(
      primary_step(t, m, 42, zero_state(t, 8), feats, mean_pool(t, feats)),
      Error);
}
