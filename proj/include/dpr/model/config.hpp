#pragma once

#include <string>

#include "dpr/core/ndarray.hpp"
#include "dpr/error.hpp"

namespace dpr {

struct EncoderConfig {
  int n_layers = 4;
  int n_heads = 4;
  Index d_model = 128;
  Index d_ff = 512;
  int vocab_size = 0;
  Index max_seq_len = 128;
  // 1-based encoder layer whose hidden states feed the auxiliary head;
  // 0 selects the middle layer.
  int aux_tap_layer = 0;
  int n_aux_layers = 2;
  bool untied_towers = false;

  int resolved_tap_layer() const { return aux_tap_layer > 0 ? aux_tap_layer : (n_layers + 1) / 2; }

  void validate() const {
    if (n_layers < 1) throw ContractError("EncoderConfig: n_layers must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0)
      throw ContractError("EncoderConfig: d_model " + std::to_string(d_model) +
                          " must be divisible by n_heads " + std::to_string(n_heads));
    if (vocab_size < 6) throw ContractError("EncoderConfig: vocab_size must cover the specials");
    if (max_seq_len < 4) throw ContractError("EncoderConfig: max_seq_len must be >= 4");
    const int tap = resolved_tap_layer();
    if (tap < 1 || tap > n_layers)
      throw ContractError("EncoderConfig: aux_tap_layer " + std::to_string(tap) +
                          " outside 1.." + std::to_string(n_layers));
    if (n_aux_layers < 1 || n_aux_layers > 2)
      throw ContractError("EncoderConfig: n_aux_layers must be 1 or 2");
  }
};

}  // namespace dpr
