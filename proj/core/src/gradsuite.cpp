#include "caag/gradsuite.hpp"

#include <sstream>

#include "caag/auxnet.hpp"
#include "caag/model.hpp"
#include "caag/train.hpp"
#include "caag/updown.hpp"
#include "caag/vocab.hpp"

namespace caag::gradsuite {

using namespace caag::diff;

namespace {

constexpr double kOpTol = 1e-4;
constexpr double kComposedTol = 1e-3;

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = rng.uniform(-1.0, 1.0);
  return t;
}

// Forced re-walk of a sampled sequence: log-probs of the given tokens under
// the decode distribution, plus the per-step hidden states. Used to freeze
// the Monte-Carlo sample while finite differences wiggle the parameters.
train::SampledRollout forced_rollout(Tape& t, model::Model& m, Var features,
                                     const std::vector<int>& tokens) {
  std::vector<bool> vocab_mask(m.dims.vocab, false);
  vocab_mask[corpus::kBos] = true;
  vocab_mask[corpus::kPad] = true;

  Var v_mean = updown::mean_pool(t, features);
  updown::StateVars state = updown::zero_state(t, m.dims.d_h);
  train::SampledRollout out;
  out.tokens = tokens;
  int prev = corpus::kBos;
  for (int tok : tokens) {
    updown::StepVars sv = updown::primary_step(t, m, prev, state, features, v_mean);
    Var probs = softmax(mask_fill(sv.logits, vocab_mask, -1e9));
    out.logp.push_back(log_floor(pick(probs, tok)));
    out.h2.push_back(sv.state.h2);
    state = sv.state;
    prev = tok;
  }
  return out;
}

Entry run_entry(const std::string& name, double tol,
                const std::vector<Parameter*>& params,
                const std::function<double(bool)>& loss) {
  Entry e;
  e.name = name;
  e.tolerance = tol;
  e.report = fd_check(params, loss);
  e.pass = e.report.pass(tol);
  return e;
}

}  // namespace

Report run_gradient_suite(std::uint64_t seed, bool negative_control) {
  Report rep;
  Rng rng(seed);

  // ---- single ops ----
  {
    Parameter a("a", random_tensor({4, 5}, rng));
    Parameter b("b", random_tensor({5, 3}, rng));
    rep.entries.push_back(run_entry("matmul", kOpTol, {&a, &b}, [&](bool g) {
      Tape t;
      Var loss = sum(matmul(t.param(a), t.param(b)));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }
  {
    Parameter x("x", random_tensor({6}, rng));
    Parameter y("y", random_tensor({6}, rng));
    std::vector<bool> mask = {false, true, false, false, true, false};
    rep.entries.push_back(run_entry("elementwise", kOpTol, {&x, &y}, [&](bool g) {
      Tape t;
      Var vx = t.param(x);
      Var vy = t.param(y);
      Var mixed = add(mul(vtanh(vx), vsigmoid(vy)), mask_fill(vx, mask, -2.5));
      Var split = concat({slice(mixed, 0, 3), slice(mixed, 3, 3)});
      Var loss = sum(mul(split, vy));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }
  {
    Parameter x("x", random_tensor({7}, rng));
    Tensor w = random_tensor({7}, rng);
    rep.entries.push_back(run_entry("softmax", kOpTol, {&x}, [&](bool g) {
      Tape t;
      Var loss = sum(mul(softmax(t.param(x)), t.input(w)));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }
  {
    Parameter x("x", random_tensor({5}, rng));
    std::vector<bool> mask = {false, true, false, true, false};
    Tensor w = random_tensor({5}, rng);
    rep.entries.push_back(run_entry("masked_softmax", kOpTol, {&x}, [&](bool g) {
      Tape t;
      Var loss = sum(mul(masked_softmax(t.param(x), mask), t.input(w)));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }
  {
    nn::EmbeddingTable table("embed", 6, 4);
    table.table.value = random_tensor({6, 4}, rng);
    std::vector<int> ids = {2, 5, 2, 0};
    Tensor w = random_tensor({4, 1}, rng);
    rep.entries.push_back(
        run_entry("embed_lookup", kOpTol, {&table.table}, [&](bool g) {
          Tape t;
          Var emb = nn::embed_lookup(t, table, ids);
          Var loss = sum(matmul(emb, t.input(w)));
          if (g) t.backward(loss);
          return t.val(loss).at(0);
        }));
  }
  {
    nn::LSTMCell cell("lstm", 5, 4);
    Rng init(seed + 1);
    cell.init(init);
    Parameter input("input", random_tensor({5}, rng));
    Parameter h("h", random_tensor({4}, rng));
    Parameter c("c", random_tensor({4}, rng));
    std::vector<Parameter*> params = {&cell.w_ih, &cell.w_hh, &cell.b,
                                      &input,     &h,         &c};
    rep.entries.push_back(run_entry("lstm_cell", kOpTol, params, [&](bool g) {
      Tape t;
      nn::LSTMState s =
          nn::lstm_cell(t, cell, t.param(input), t.param(h), t.param(c));
      Var loss = add(sum(s.h), sum(s.c));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }
  {
    nn::AdditiveAttention att("att", 3, 4, 5);
    Rng init(seed + 2);
    att.init(init);
    Parameter keys("keys", random_tensor({4, 4}, rng));
    Parameter query("query", random_tensor({5}, rng));
    std::vector<bool> mask = {false, true, false, false};
    std::vector<Parameter*> params = {&att.w_key, &att.w_query, &att.v, &keys,
                                      &query};
    rep.entries.push_back(run_entry("attention", kOpTol, params, [&](bool g) {
      Tape t;
      nn::AttentionOut out = nn::additive_attention(t, att, t.param(keys),
                                                    t.param(query), &mask);
      Var loss = add(sum(out.context), pick(out.weights, 2));
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }

  // ---- composed losses on a tiny model ----
  model::Dims dims{10, 8, 4, 8, 4};
  model::Model m(dims);
  Rng minit(seed + 3);
  m.init_primary(minit);
  m.init_aux(minit);
  Tensor features = random_tensor({3, 4}, rng);
  std::vector<int> gt = {corpus::kBos, 4, 7, 5, corpus::kEos};

  {
    auto params = m.primary_params();
    rep.entries.push_back(run_entry("xe_loss", kComposedTol, params, [&](bool g) {
      Tape t;
      updown::Rollout ro = updown::teacher_forced_rollout(
          t, m, t.input(features), gt, corpus::kMaxLen);
      Var loss = train::xe_loss(t, ro.p1, gt);
      if (g) t.backward(loss);
      return t.val(loss).at(0);
    }));
  }

  // frozen Monte-Carlo sample for the policy-gradient surrogates
  std::vector<int> sampled;
  {
    Tape t;
    Rng srng(seed + 4);
    sampled =
        train::sample_rollout(t, m, t.input(features), corpus::kMaxLen, srng).tokens;
  }
  const double adv = 0.7;

  {
    auto params = m.primary_params();
    rep.entries.push_back(
        run_entry("scst_surrogate", kComposedTol, params, [&](bool g) {
          Tape t;
          train::SampledRollout ro = forced_rollout(t, m, t.input(features), sampled);
          Var sum_logp = t.input(Tensor::scalar(0.0));
          for (Var lp : ro.logp) sum_logp = add(sum_logp, lp);
          Var loss = scale(sum_logp, -adv);
          if (g) t.backward(loss);
          return t.val(loss).at(0);
        }));
  }
  {
    auto params = m.all_params();
    rep.entries.push_back(
        run_entry("caag_loss", kComposedTol, params, [&](bool g) {
          Tape t;
          train::SampledRollout ro = forced_rollout(t, m, t.input(features), sampled);
          Var loss = train::caag_loss(t, m, ro, adv, /*stop_gradient=*/false);
          if (g) t.backward(loss);
          return t.val(loss).at(0);
        }));
  }
  {
    auto params = m.all_params();
    rep.entries.push_back(
        run_entry("joint_loss", kComposedTol, params, [&](bool g) {
          Tape t;
          train::SampledRollout ro = forced_rollout(t, m, t.input(features), sampled);
          Var sum_logp = t.input(Tensor::scalar(0.0));
          for (Var lp : ro.logp) sum_logp = add(sum_logp, lp);
          Var loss = add(scale(sum_logp, -adv),
                         train::caag_loss(t, m, ro, adv, false));
          if (g) t.backward(loss);
          return t.val(loss).at(0);
        }));
  }

  if (negative_control) {
    Parameter x("x", random_tensor({4}, rng));
    rep.entries.push_back(
        run_entry("corrupted_backward", kOpTol, {&x}, [&](bool g) {
          Tape t;
          Var loss = sum(corrupted_scale(t.param(x), 1.5));
          if (g) t.backward(loss);
          return t.val(loss).at(0);
        }));
  }

  for (const Entry& e : rep.entries) rep.all_pass = rep.all_pass && e.pass;
  return rep;
}

std::string format_report(const Report& rep) {
  std::ostringstream os;
  os << "  component            max rel err   tolerance   status\n";
  for (const Entry& e : rep.entries) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-20s %11.3e %11.0e   %s\n",
                  e.name.c_str(), e.report.max_rel, e.tolerance,
                  e.pass ? "pass" : "FAIL");
    os << line;
    if (!e.pass)
      os << "    worst: " << e.report.worst_param << "[" << e.report.worst_index
         << "] analytic " << e.report.analytic << " vs numeric "
         << e.report.numeric << "\n";
  }
  return os.str();
}

}  // namespace caag::gradsuite
