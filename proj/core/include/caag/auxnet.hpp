#pragma once

#include <optional>
#include <vector>

#include "caag/model.hpp"
#include "caag/tape.hpp"

namespace caag::aux {

using diff::Tape;
using diff::Var;

struct SemanticOut {
  Var beta;     // [T], beta[mask_pos] exactly 0 when masked
  Var context;  // [d_e]
};

/// Semantic attention over the global-context word embeddings. When mask_pos
/// is set the target word is excluded ("self-unknown"): its weight is exactly
/// zero and the outputs are bitwise independent of that embedding.
SemanticOut semantic_attention(Tape& t, model::Model& m, Var ctx_embeddings,
                               Var h2, std::optional<std::size_t> mask_pos);

struct AuxStepVars {
  Var p2;
  Var logits;
  Var h3, c3;
};

/// LSTM3 over [c_t ; h2_t], output distribution of the auxiliary head.
AuxStepVars caag_step(Tape& t, model::Model& m, Var context, Var h2, Var h3,
                      Var c3);

/// Inference-time combination p = (p1 + lambda * p2) / (1 + lambda). The
/// normalization keeps a true distribution; per step it divides every
/// candidate by the same constant, so rankings match the raw sum.
Tensor combine(const Tensor& p1, const Tensor& p2, double lambda);

}  // namespace caag::aux
