#include "caag/updown.hpp"

#include "caag/vocab.hpp"

namespace caag::updown {

using namespace caag::diff;

StateVars zero_state(Tape& t, std::size_t d_h) {
  Var z = t.input(Tensor::zeros({d_h}));
  return StateVars{z, z, z, z};
}

Var mean_pool(Tape& t, Var features) {
  (void)t;
  return mean_rows(features);
}

StepVars primary_step(Tape& t, model::Model& m, int prev_word,
                      const StateVars& state, Var features, Var v_mean) {
  Var x = nn::embed_one(t, m.embed, prev_word);
  Var in1 = concat({x, state.h2, v_mean});
  nn::LSTMState s1 = nn::lstm_cell(t, m.lstm_attn, in1, state.h1, state.c1);

  nn::AttentionOut att = nn::additive_attention(t, m.att_visual, features, s1.h);

  Var in2 = concat({att.context, s1.h});
  nn::LSTMState s2 = nn::lstm_cell(t, m.lstm_lang, in2, state.h2, state.c2);

  Var logits = nn::linear(t, m.out_primary, s2.h);
  Var p1 = softmax(logits);
  return StepVars{p1, logits, att.weights, StateVars{s1.h, s1.c, s2.h, s2.c}};
}

Rollout teacher_forced_rollout(Tape& t, model::Model& m, Var features,
                               const std::vector<int>& gt, std::size_t max_len) {
  if (gt.size() < 2 || gt.front() != corpus::kBos)
    throw Error("teacher_forced_rollout: sequence must be BOS-prefixed with at "
                "least one target");
  std::size_t steps = gt.size() - 1;
  if (steps > max_len)
    throw Error("teacher_forced_rollout: " + std::to_string(steps) +
                " steps exceed max_len " + std::to_string(max_len));

  Var v_mean = mean_pool(t, features);
  StateVars state = zero_state(t, m.dims.d_h);
  Rollout out;
  for (std::size_t step = 0; step < steps; ++step) {
    StepVars sv = primary_step(t, m, gt[step], state, features, v_mean);
    out.p1.push_back(sv.p1);
    out.logits.push_back(sv.logits);
    out.alpha.push_back(sv.alpha);
    out.h2.push_back(sv.state.h2);
    state = sv.state;
  }
  return out;
}

}  // namespace caag::updown
