#include "caag/auxnet.hpp"

namespace caag::aux {

using namespace caag::diff;

SemanticOut semantic_attention(Tape& t, model::Model& m, Var ctx_embeddings,
                               Var h2, std::optional<std::size_t> mask_pos) {
  const Tensor& ctx = t.val(ctx_embeddings);
  if (ctx.rank() != 2 || ctx.rows() == 0)
    throw Error("semantic_attention: expected [T x d_e] context, got " +
                shape_str(ctx.shape));
  std::size_t T = ctx.rows();
  if (mask_pos) {
    if (*mask_pos >= T)
      throw Error("semantic_attention: mask position " +
                  std::to_string(*mask_pos) + " out of range for length " +
                  std::to_string(T));
    if (T < 2)
      throw Error("semantic_attention: context too short to mask");
    std::vector<bool> mask(T, false);
    mask[*mask_pos] = true;
    nn::AttentionOut out =
        nn::additive_attention(t, m.att_semantic, ctx_embeddings, h2, &mask);
    return SemanticOut{out.weights, out.context};
  }
  nn::AttentionOut out =
      nn::additive_attention(t, m.att_semantic, ctx_embeddings, h2, nullptr);
  return SemanticOut{out.weights, out.context};
}

AuxStepVars caag_step(Tape& t, model::Model& m, Var context, Var h2, Var h3,
                      Var c3) {
  Var in3 = concat({context, h2});
  nn::LSTMState s3 = nn::lstm_cell(t, m.lstm_aux, in3, h3, c3);
  Var logits = nn::linear(t, m.out_aux, s3.h);
  Var p2 = softmax(logits);
  return AuxStepVars{p2, logits, s3.h, s3.c};
}

Tensor combine(const Tensor& p1, const Tensor& p2, double lambda) {
  if (!p1.same_shape(p2))
    throw Error("combine: distribution sizes differ: " + shape_str(p1.shape) +
                " vs " + shape_str(p2.shape));
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw Error("combine: lambda must be finite and non-negative");
  Tensor out = p1;
  double inv = 1.0 / (1.0 + lambda);
  for (std::size_t i = 0; i < out.numel(); ++i)
    out.v[i] = (p1.v[i] + lambda * p2.v[i]) * inv;
  return out;
}

}  // namespace caag::aux
