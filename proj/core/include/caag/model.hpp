#pragma once

#include <cstdint>
#include <vector>

#include "caag/nn.hpp"

namespace caag::model {

/// Network widths. Desk-scale defaults; the original-scale values
/// (1000/512/1000/2048) are plain config choices.
struct Dims {
  std::size_t vocab = 0;
  std::size_t d_h = 64;  // LSTM hidden width
  std::size_t d_a = 32;  // attention width
  std::size_t d_e = 64;  // word embedding width
  std::size_t d_i = 16;  // region feature width
};

/// The full parameter set: Up-Down primary decoder plus the context-aware
/// auxiliary head. The embedding table is shared between the two.
struct Model {
  Dims dims;

  // primary
  nn::EmbeddingTable embed;
  nn::LSTMCell lstm_attn;      // LSTM1: [x_t ; h2_prev ; v_mean]
  nn::AdditiveAttention att_visual;
  nn::LSTMCell lstm_lang;      // LSTM2: [v_hat ; h1]
  nn::Linear out_primary;

  // auxiliary
  nn::AdditiveAttention att_semantic;  // keys = context word embeddings
  nn::LSTMCell lstm_aux;               // LSTM3: [c_t ; h2]
  nn::Linear out_aux;

  explicit Model(Dims d);

  void init_primary(Rng& rng);
  void init_aux(Rng& rng);

  std::vector<diff::Parameter*> primary_params();
  std::vector<diff::Parameter*> aux_params();
  std::vector<diff::Parameter*> all_params();
};

}  // namespace caag::model
