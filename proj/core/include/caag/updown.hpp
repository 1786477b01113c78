#pragma once

#include <vector>

#include "caag/model.hpp"
#include "caag/tape.hpp"

namespace caag::updown {

using diff::Tape;
using diff::Var;

/// Recurrent state of the primary decoder (auxiliary LSTM state is carried
/// separately by callers that use it).
struct StateVars {
  Var h1, c1, h2, c2;
};

StateVars zero_state(Tape& t, std::size_t d_h);

/// Mean-pooled image feature over the k regions.
Var mean_pool(Tape& t, Var features);

struct StepVars {
  Var p1;      // softmax over the full vocabulary
  Var logits;  // pre-softmax activations (decode layers restrict on these)
  Var alpha;   // visual attention weights, [k]
  StateVars state;
};

/// One decode step: attention LSTM over [x_t ; h2_prev ; v_mean], visual
/// attention, language LSTM over [v_hat ; h1], output distribution.
StepVars primary_step(Tape& t, model::Model& m, int prev_word,
                      const StateVars& state, Var features, Var v_mean);

struct Rollout {
  std::vector<Var> p1;
  std::vector<Var> logits;
  std::vector<Var> alpha;
  std::vector<Var> h2;
};

/// Teacher forcing over a BOS-prefixed, EOS-terminated ground-truth sequence;
/// step t conditions on gt[t] and is scored against gt[t+1].
Rollout teacher_forced_rollout(Tape& t, model::Model& m, Var features,
                               const std::vector<int>& gt,
                               std::size_t max_len);

}  // namespace caag::updown
