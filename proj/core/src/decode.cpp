#include "caag/decode.hpp"

#include <algorithm>
#include <cmath>

#include "caag/vocab.hpp"

namespace caag::decode {

using namespace caag::diff;

namespace {

std::vector<bool> caption_token_mask(std::size_t vocab) {
  std::vector<bool> mask(vocab, false);
  mask[corpus::kBos] = true;
  mask[corpus::kPad] = true;
  return mask;
}

double log_prob(double p) { return std::log(std::max(p, 1e-12)); }

bool lex_less(const std::vector<int>& a, const std::vector<int>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// score desc, then token sequence lexicographic asc
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_score != b.log_score) return a.log_score > b.log_score;
  return lex_less(a.tokens, b.tokens);
}

}  // namespace

StateVals StateVals::zeros(std::size_t d_h) {
  StateVals s;
  Tensor z = Tensor::zeros({d_h});
  s.h1 = s.c1 = s.h2 = s.c2 = s.h3 = s.c3 = z;
  return s;
}

PrimaryScorer::PrimaryScorer(model::Model& m, Tensor features)
    : m_(m), features_(std::move(features)) {}

StepOut PrimaryScorer::step(int prev_token, const StateVals& s,
                            std::size_t step_index) const {
  (void)step_index;
  Tape t;
  Var feats = t.input(features_);
  Var v_mean = updown::mean_pool(t, feats);
  updown::StateVars sv{t.input(s.h1), t.input(s.c1), t.input(s.h2), t.input(s.c2)};
  updown::StepVars out = updown::primary_step(t, m_, prev_token, sv, feats, v_mean);

  Var restricted =
      softmax(mask_fill(out.logits, caption_token_mask(m_.dims.vocab), -1e9));

  StepOut so;
  so.probs = t.val(restricted);
  so.alpha = t.val(out.alpha);
  so.p1 = t.val(out.p1);
  so.state = s;
  so.state.h1 = t.val(out.state.h1);
  so.state.c1 = t.val(out.state.c1);
  so.state.h2 = t.val(out.state.h2);
  so.state.c2 = t.val(out.state.c2);
  return so;
}

JointScorer::JointScorer(model::Model& m, Tensor features,
                         std::vector<int> context, double lambda)
    : m_(m), features_(std::move(features)), context_(std::move(context)),
      lambda_(lambda) {
  if (context_.empty()) throw Error("joint scorer: empty global context");
}

StepOut JointScorer::step(int prev_token, const StateVals& s,
                          std::size_t step_index) const {
  Tape t;
  Var feats = t.input(features_);
  Var v_mean = updown::mean_pool(t, feats);
  updown::StateVars sv{t.input(s.h1), t.input(s.c1), t.input(s.h2), t.input(s.c2)};
  updown::StepVars out = updown::primary_step(t, m_, prev_token, sv, feats, v_mean);

  const std::vector<bool> vocab_mask = caption_token_mask(m_.dims.vocab);
  Var p1r = softmax(mask_fill(out.logits, vocab_mask, -1e9));

  StepOut so;
  so.alpha = t.val(out.alpha);
  so.p1 = t.val(out.p1);
  so.state = s;
  so.state.h1 = t.val(out.state.h1);
  so.state.c1 = t.val(out.state.c1);
  so.state.h2 = t.val(out.state.h2);
  so.state.c2 = t.val(out.state.c2);

  // the hypothesis is masked against the context only while it is inside it
  std::size_t T = context_.size();
  std::optional<std::size_t> mask_pos;
  if (step_index < T) mask_pos = step_index;

  if (mask_pos && T < 2) {
    // masking would eliminate the whole context; score with the primary alone
    so.probs = t.val(p1r);
    return so;
  }

  Var ctx_emb = nn::embed_lookup(t, m_.embed, context_);
  aux::SemanticOut sem =
      aux::semantic_attention(t, m_, ctx_emb, out.state.h2, mask_pos);
  aux::AuxStepVars aout = aux::caag_step(t, m_, sem.context, out.state.h2,
                                         t.input(s.h3), t.input(s.c3));
  Var p2r = softmax(mask_fill(aout.logits, vocab_mask, -1e9));

  so.beta = t.val(sem.beta);
  so.p2 = t.val(p2r);
  so.state.h3 = t.val(aout.h3);
  so.state.c3 = t.val(aout.c3);
  so.probs = aux::combine(t.val(p1r), t.val(p2r), lambda_);
  return so;
}

DecodeResult greedy_decode(const StepScorer& scorer, std::size_t max_len) {
  StateVals state = StateVals::zeros(scorer.hidden());
  DecodeResult r;
  int prev = corpus::kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    StepOut so = scorer.step(prev, state, step);
    std::size_t best = 0;
    for (std::size_t i = 1; i < so.probs.numel(); ++i)
      if (so.probs.at(i) > so.probs.at(best)) best = i;
    r.tokens.push_back(static_cast<int>(best));
    r.log_score += log_prob(so.probs.at(best));
    state = so.state;
    prev = static_cast<int>(best);
    if (prev == corpus::kEos) break;
  }
  return r;
}

DecodeResult beam_search(const StepScorer& scorer, std::size_t width,
                         std::size_t max_len, bool length_norm) {
  if (width < 1) throw Error("beam_search: width must be >= 1");
  std::size_t vocab = scorer.vocab();

  std::vector<Hypothesis> live(1);
  live[0].state = StateVals::zeros(scorer.hidden());
  std::vector<Hypothesis> pool;

  for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& hyp : live) {
      int prev = hyp.tokens.empty() ? corpus::kBos : hyp.tokens.back();
      StepOut so = scorer.step(prev, hyp.state, step);
      for (std::size_t tok = 0; tok < vocab; ++tok) {
        if (tok == corpus::kBos || tok == corpus::kPad) continue;
        Hypothesis next;
        next.tokens = hyp.tokens;
        next.tokens.push_back(static_cast<int>(tok));
        next.log_score = hyp.log_score + log_prob(so.probs.at(tok));
        next.state = so.state;
        next.finished =
            tok == static_cast<std::size_t>(corpus::kEos) || next.tokens.size() == max_len;
        if (next.finished)
          pool.push_back(std::move(next));
        else
          candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better);
    if (candidates.size() > width) candidates.resize(width);
    live = std::move(candidates);
  }

  if (pool.empty()) {
    // only possible when max_len truncation retired nothing, i.e. no steps ran
    throw Error("beam_search: no finished hypothesis (max_len must be >= 1)");
  }

  auto final_key = [length_norm](const Hypothesis& h) {
    return length_norm && !h.tokens.empty()
               ? h.log_score / static_cast<double>(h.tokens.size())
               : h.log_score;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    double a = final_key(pool[i]), b = final_key(pool[best]);
    if (a > b || (a == b && lex_less(pool[i].tokens, pool[best].tokens)))
      best = i;
  }
  return DecodeResult{pool[best].tokens, pool[best].log_score};
}

DecodeResult greedy_primary(model::Model& m, const Tensor& features,
                            std::size_t max_len) {
  PrimaryScorer scorer(m, features);
  return greedy_decode(scorer, max_len);
}

JointResult joint_caption(model::Model& m, const Tensor& features, double lambda,
                          std::size_t width, std::size_t max_len,
                          bool length_norm) {
  JointResult jr;
  DecodeResult ctx = greedy_primary(m, features, max_len);
  jr.context = ctx.tokens;

  bool has_word = false;
  for (int tok : ctx.tokens)
    if (tok != corpus::kEos) has_word = true;

  if (!has_word) {
    jr.fell_back_primary = true;
    PrimaryScorer scorer(m, features);
    jr.result = beam_search(scorer, width, max_len, length_norm);
    return jr;
  }

  JointScorer scorer(m, features, ctx.tokens, lambda);
  jr.result = beam_search(scorer, width, max_len, length_norm);
  return jr;
}

std::vector<StepOut> trace_steps(const StepScorer& scorer,
                                 const std::vector<int>& tokens) {
  std::vector<StepOut> out;
  StateVals state = StateVals::zeros(scorer.hidden());
  int prev = corpus::kBos;
  for (std::size_t step = 0; step < tokens.size(); ++step) {
    StepOut so = scorer.step(prev, state, step);
    state = so.state;
    prev = tokens[step];
    out.push_back(std::move(so));
  }
  return out;
}

}  // namespace caag::decode
