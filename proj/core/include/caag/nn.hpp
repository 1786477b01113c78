#pragma once

#include <optional>
#include <string>
#include <vector>

#include "caag/tape.hpp"

namespace caag::nn {

using diff::Parameter;
using diff::Tape;
using diff::Var;

/// Word-embedding table, one row per vocabulary id (specials included).
struct EmbeddingTable {
  Parameter table;  // [vocab x d_e]

  EmbeddingTable() = default;
  EmbeddingTable(const std::string& name, std::size_t vocab, std::size_t d_e)
      : table(name + ".table", Tensor::zeros({vocab, d_e})) {}

  std::size_t vocab() const { return table.value.rows(); }
  std::size_t width() const { return table.value.cols(); }
  void init(Rng& rng) { table.init_uniform(rng); }
};

/// Row gather for a whole id sequence -> [T x d_e]. Duplicate ids accumulate
/// gradient into the same table row.
Var embed_lookup(Tape& t, EmbeddingTable& table, const std::vector<int>& ids);
Var embed_one(Tape& t, EmbeddingTable& table, int id);

/// Single LSTM cell. Combined gate blocks in i, f, g, o order; the forget
/// block of the bias is initialized to 1.0.
struct LSTMCell {
  Parameter w_ih;  // [4H x d_in]
  Parameter w_hh;  // [4H x H]
  Parameter b;     // [4H]
  std::size_t input_width = 0;
  std::size_t hidden_width = 0;

  LSTMCell() = default;
  LSTMCell(const std::string& name, std::size_t d_in, std::size_t d_h)
      : w_ih(name + ".w_ih", Tensor::zeros({4 * d_h, d_in})),
        w_hh(name + ".w_hh", Tensor::zeros({4 * d_h, d_h})),
        b(name + ".b", Tensor::zeros({4 * d_h})),
        input_width(d_in),
        hidden_width(d_h) {}

  void init(Rng& rng) {
    w_ih.init_uniform(rng);
    w_hh.init_uniform(rng);
    b.init_uniform(rng);
    for (std::size_t i = hidden_width; i < 2 * hidden_width; ++i)
      b.value.v[i] = 1.0;
  }

  std::vector<Parameter*> params() { return {&w_ih, &w_hh, &b}; }
};

struct LSTMState {
  Var h;
  Var c;
};

LSTMState lstm_cell(Tape& t, LSTMCell& cell, Var input, Var h, Var c);

/// Additive (Bahdanau-style) attention: score_i = v . tanh(Wk k_i + Wq q).
/// Shared by the visual and the semantic attention heads; they differ only in
/// their parameter sets and key sources.
struct AdditiveAttention {
  Parameter w_key;    // [d_a x d_key]
  Parameter w_query;  // [d_a x d_h]
  Parameter v;        // [d_a]

  AdditiveAttention() = default;
  AdditiveAttention(const std::string& name, std::size_t d_a, std::size_t d_key,
                    std::size_t d_h)
      : w_key(name + ".w_key", Tensor::zeros({d_a, d_key})),
        w_query(name + ".w_query", Tensor::zeros({d_a, d_h})),
        v(name + ".v", Tensor::zeros({d_a})) {}

  void init(Rng& rng) {
    w_key.init_uniform(rng);
    w_query.init_uniform(rng);
    v.init_uniform(rng);
  }

  std::vector<Parameter*> params() { return {&w_key, &w_query, &v}; }
};

struct AttentionOut {
  Var weights;  // [n], masked entries exactly 0
  Var context;  // [d_key]
};

/// mask entries set to true are excluded from the distribution (weight
/// exactly 0, zero gradient, output bitwise independent of the masked key).
AttentionOut additive_attention(Tape& t, AdditiveAttention& att, Var keys,
                                Var query,
                                const std::vector<bool>* mask = nullptr);

struct Linear {
  Parameter w;  // [out x in]
  Parameter b;  // [out]

  Linear() = default;
  Linear(const std::string& name, std::size_t out, std::size_t in)
      : w(name + ".w", Tensor::zeros({out, in})),
        b(name + ".b", Tensor::zeros({out})) {}

  void init(Rng& rng) {
    w.init_uniform(rng);
    b.init_uniform(rng);
  }

  std::vector<Parameter*> params() { return {&w, &b}; }
};

Var linear(Tape& t, Linear& lin, Var x);

}  // namespace caag::nn
