#pragma once

#include <memory>
#include <vector>

#include "caag/auxnet.hpp"
#include "caag/model.hpp"
#include "caag/updown.hpp"

namespace caag::decode {

/// Value-level decoder state carried by each hypothesis (aux LSTM state
/// included; primary-only decoding ignores h3/c3).
struct StateVals {
  Tensor h1, c1, h2, c2, h3, c3;

  static StateVals zeros(std::size_t d_h);
};

/// Everything one decode step exposes. `probs` is the distribution actually
/// scored; BOS and PAD are excluded (masked to -1e9 on the logits and
/// renormalized) since captions may not contain them.
struct StepOut {
  Tensor probs;
  Tensor alpha;  // visual attention weights
  Tensor p1;     // full primary softmax
  Tensor p2;     // auxiliary distribution (empty when unused this step)
  Tensor beta;   // semantic attention weights (empty when unused this step)
  StateVals state;
};

/// Per-step distribution source for the search routines.
class StepScorer {
public:
  virtual ~StepScorer() = default;
  virtual StepOut step(int prev_token, const StateVals& s,
                       std::size_t step_index) const = 0;
  virtual std::size_t vocab() const = 0;
  virtual std::size_t hidden() const = 0;
};

class PrimaryScorer : public StepScorer {
public:
  PrimaryScorer(model::Model& m, Tensor features);
  StepOut step(int prev_token, const StateVals& s,
               std::size_t step_index) const override;
  std::size_t vocab() const override { return m_.dims.vocab; }
  std::size_t hidden() const override { return m_.dims.d_h; }

private:
  model::Model& m_;
  Tensor features_;
};

/// Scores with p = (p1 + lambda p2) / (1 + lambda); p2 is conditioned on a
/// fixed global context with the current position masked while the
/// hypothesis is still inside the context.
class JointScorer : public StepScorer {
public:
  JointScorer(model::Model& m, Tensor features, std::vector<int> context,
              double lambda);
  StepOut step(int prev_token, const StateVals& s,
               std::size_t step_index) const override;
  std::size_t vocab() const override { return m_.dims.vocab; }
  std::size_t hidden() const override { return m_.dims.d_h; }

  const std::vector<int>& context() const { return context_; }

private:
  model::Model& m_;
  Tensor features_;
  std::vector<int> context_;
  double lambda_;
};

struct Hypothesis {
  std::vector<int> tokens;
  double log_score = 0.0;
  StateVals state;
  bool finished = false;
};

struct DecodeResult {
  std::vector<int> tokens;  // EOS-terminated unless truncated at max_len
  double log_score = 0.0;
};

/// Argmax per step, ties broken toward the lowest token id.
DecodeResult greedy_decode(const StepScorer& scorer, std::size_t max_len);

/// Length-wise beam over cumulative log probability. Hypotheses that emit
/// EOS (or hit max_len) retire into a pool without occupying beam slots; the
/// best finished hypothesis wins, ties broken by token sequence. No length
/// normalization unless asked for.
DecodeResult beam_search(const StepScorer& scorer, std::size_t width,
                         std::size_t max_len, bool length_norm = false);

DecodeResult greedy_primary(model::Model& m, const Tensor& features,
                            std::size_t max_len);

struct JointResult {
  DecodeResult result;
  std::vector<int> context;        // stage-1 greedy output
  bool fell_back_primary = false;  // context had no real words
};

/// Two-stage inference: greedy primary decode fixes the global context, then
/// a joint beam search scores with the combined distribution.
JointResult joint_caption(model::Model& m, const Tensor& features, double lambda,
                          std::size_t width, std::size_t max_len,
                          bool length_norm = false);

/// Re-walk a fixed token sequence through a scorer, collecting the per-step
/// attention weights and distributions (for dumps and inspection).
std::vector<StepOut> trace_steps(const StepScorer& scorer,
                                 const std::vector<int>& tokens);

}  // namespace caag::decode
