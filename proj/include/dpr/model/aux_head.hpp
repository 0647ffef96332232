#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dpr/data/types.hpp"
#include "dpr/model/config.hpp"
#include "dpr/model/transformer_layer.hpp"

namespace dpr {

// Head used by contrastive pre-training: it reads the sequence formed by the
// pooled [CLS] state followed by the hidden states tapped from an interior
// encoder layer (the tapped state at position 0 is replaced by the pooled
// state) and produces MLM logits over the full sequence.
template <typename Scalar>
class AuxHead {
 public:
  AuxHead() = default;

  AuxHead(const EncoderConfig& cfg, Rng& rng) : tap_layer_(cfg.resolved_tap_layer()) {
    const Scalar std = Scalar(0.02);
    for (int l = 0; l < cfg.n_aux_layers; ++l)
      layers_.emplace_back(cfg.d_model, cfg.d_ff, cfg.n_heads, rng, std);
  }

  int tap_layer() const { return tap_layer_; }

  // Hidden states over [h_cls, tapped_1 .. tapped_{n-1}] per sequence.
  // h_cls: batch x d. tapped: (batch*seq_len) x d states of the tap layer,
  // from the same forward pass.
  NdArray<Scalar> forward_states(const NdArray<Scalar>& h_cls, const NdArray<Scalar>& tapped,
                                 const TokenBatch& batch, int from_layer) const {
    if (from_layer != tap_layer_)
      throw ContractError("aux_head: states tapped from layer " + std::to_string(from_layer) +
                          " but head is configured for layer " + std::to_string(tap_layer_));
    if (tapped.rows() != batch.batch * batch.seq_len || h_cls.rows() != batch.batch)
      throw ContractError("aux_head: state/batch shape mismatch");

    std::vector<NdArray<Scalar>> pieces;
    pieces.reserve(static_cast<std::size_t>(batch.batch) * 2);
    for (Index b = 0; b < batch.batch; ++b) {
      std::vector<Index> one{b};
      pieces.push_back(rows_gather(h_cls, one));
      if (batch.seq_len > 1) {
        std::vector<Index> rows(static_cast<std::size_t>(batch.seq_len - 1));
        for (Index i = 1; i < batch.seq_len; ++i)
          rows[static_cast<std::size_t>(i - 1)] = b * batch.seq_len + i;
        pieces.push_back(rows_gather(tapped, rows));
      }
    }
    auto x = concat_rows(pieces);
    for (const auto& layer : layers_)
      x = layer.forward(x, batch.batch, batch.seq_len, batch.attention_mask, /*causal=*/false);
    return x;
  }

  // Full MLM-style logits over the sequence, tied to the embedding table.
  NdArray<Scalar> logits(const NdArray<Scalar>& h_cls, const NdArray<Scalar>& tapped,
                         const TokenBatch& batch, int from_layer,
                         const NdArray<Scalar>& tok_emb) const {
    return matmul_nt(forward_states(h_cls, tapped, batch, from_layer), tok_emb);
  }

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, NdArray<Scalar>>>& out) const {
    for (std::size_t l = 0; l < layers_.size(); ++l)
      layers_[l].collect(prefix + ".layer" + std::to_string(l), out);
  }

 private:
  int tap_layer_ = 0;
  std::vector<TransformerLayer<Scalar>> layers_;
};

}  // namespace dpr
