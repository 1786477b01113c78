#include "caag/nn.hpp"

namespace caag::nn {

using namespace caag::diff;

Var embed_lookup(Tape& t, EmbeddingTable& table, const std::vector<int>& ids) {
  return rows(t.param(table.table), ids);
}

Var embed_one(Tape& t, EmbeddingTable& table, int id) {
  return row(t.param(table.table), id);
}

LSTMState lstm_cell(Tape& t, LSTMCell& cell, Var input, Var h, Var c) {
  std::size_t H = cell.hidden_width;
  const Tensor& in = t.val(input);
  if (in.numel() != cell.input_width)
    throw Error("lstm_cell: input width " + shape_str(in.shape) +
                " does not match cell input " + std::to_string(cell.input_width));
  if (t.val(h).numel() != H || t.val(c).numel() != H)
    throw Error("lstm_cell: state width " + shape_str(t.val(h).shape) +
                " does not match hidden " + std::to_string(H));

  Var z = add(add(matvec(t.param(cell.w_ih), input), matvec(t.param(cell.w_hh), h)),
              t.param(cell.b));
  Var gi = vsigmoid(slice(z, 0, H));
  Var gf = vsigmoid(slice(z, H, H));
  Var gg = vtanh(slice(z, 2 * H, H));
  Var go = vsigmoid(slice(z, 3 * H, H));
  Var c_next = add(mul(gf, c), mul(gi, gg));
  Var h_next = mul(go, vtanh(c_next));
  return {h_next, c_next};
}

AttentionOut additive_attention(Tape& t, AdditiveAttention& att, Var keys,
                                Var query, const std::vector<bool>* mask) {
  const Tensor& K = t.val(keys);
  if (K.rank() != 2 || K.rows() == 0)
    throw Error("additive_attention: expected [n x d_key] keys, got " +
                shape_str(K.shape));
  if (mask && mask->size() != K.rows())
    throw Error("additive_attention: mask length " +
                std::to_string(mask->size()) + " does not match " +
                std::to_string(K.rows()) + " keys");

  // scores[n] = v . tanh(K Wk^T + 1 (Wq q)^T)
  Var proj = add_rowvec(matmul(keys, transpose(t.param(att.w_key))),
                        matvec(t.param(att.w_query), query));
  Var u = matvec(vtanh(proj), t.param(att.v));
  Var weights = mask ? masked_softmax(u, *mask) : softmax(u);
  Var context = vecmat(weights, keys);
  return {weights, context};
}

Var linear(Tape& t, Linear& lin, Var x) {
  return add(matvec(t.param(lin.w), x), t.param(lin.b));
}

}  // namespace caag::nn
