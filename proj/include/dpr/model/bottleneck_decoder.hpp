#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dpr/data/types.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/model/config.hpp"
#include "dpr/model/transformer_layer.hpp"

namespace dpr {

// Single-layer causal decoder that reconstructs a generation context from
// the encoder's pooled [CLS] state. That state is the only encoder signal:
// it is prepended as position 0 of the decoder input. Token embeddings are
// shared with the encoder; position embeddings are the decoder's own.
template <typename Scalar>
class BottleneckDecoder {
 public:
  BottleneckDecoder() = default;

  BottleneckDecoder(const EncoderConfig& cfg, Rng& rng)
      : d_model_(cfg.d_model), max_len_(cfg.max_seq_len) {
    const Scalar std = Scalar(0.02);
    pos_emb_ = NdArray<Scalar>::randn({max_len_, d_model_}, rng, std, true);
    in_ln_gain_ = NdArray<Scalar>::filled({d_model_}, Scalar(1), true);
    in_ln_bias_ = NdArray<Scalar>::zeros({d_model_}, true);
    layer_ = TransformerLayer<Scalar>(cfg.d_model, cfg.d_ff, cfg.n_heads, rng, std);
  }

  // h_cls: batch x d_model pooled states. ctx carries x_1..x_N rows (no
  // [CLS]), padded. Returns logits of shape (batch*(N+1)) x vocab where the
  // row for position i predicts x_{i+1} and the final real position
  // predicts [SEP].
  NdArray<Scalar> decode_logits(const NdArray<Scalar>& h_cls, const TokenBatch& ctx,
                                const NdArray<Scalar>& tok_emb) const {
    if (ctx.batch != h_cls.rows())
      throw ContractError("bottleneck_decode: " + std::to_string(h_cls.rows()) +
                          " pooled rows for " + std::to_string(ctx.batch) + " context rows");
    if (ctx.seq_len < 1) throw ContractError("bottleneck_decode: empty context");
    if (ctx.seq_len + 1 > max_len_)
      throw ContractError("bottleneck_decode: context of " + std::to_string(ctx.seq_len) +
                          " tokens exceeds decoder length " + std::to_string(max_len_));

    const Index dec_len = ctx.seq_len + 1;
    // Interleave [h_cls_b ; tok_emb rows of b] for every sequence.
    std::vector<NdArray<Scalar>> pieces;
    pieces.reserve(static_cast<std::size_t>(ctx.batch) * 2);
    auto ctx_emb = embedding_lookup(tok_emb, ctx.ids);
    for (Index b = 0; b < ctx.batch; ++b) {
      std::vector<Index> one{b};
      pieces.push_back(rows_gather(h_cls, one));
      std::vector<Index> rows(static_cast<std::size_t>(ctx.seq_len));
      for (Index i = 0; i < ctx.seq_len; ++i)
        rows[static_cast<std::size_t>(i)] = b * ctx.seq_len + i;
      pieces.push_back(rows_gather(ctx_emb, rows));
    }
    auto x = concat_rows(pieces);

    std::vector<int> pos_ids(static_cast<std::size_t>(ctx.batch * dec_len));
    std::vector<std::uint8_t> key_mask(static_cast<std::size_t>(ctx.batch * dec_len));
    for (Index b = 0; b < ctx.batch; ++b) {
      for (Index i = 0; i < dec_len; ++i) {
        pos_ids[static_cast<std::size_t>(b * dec_len + i)] = static_cast<int>(i);
        key_mask[static_cast<std::size_t>(b * dec_len + i)] =
            i == 0 ? std::uint8_t(1)
                   : ctx.attention_mask[static_cast<std::size_t>(b * ctx.seq_len + i - 1)];
      }
    }
    x = layer_norm(add(x, embedding_lookup(pos_emb_, pos_ids)), in_ln_gain_, in_ln_bias_);
    x = layer_.forward(x, ctx.batch, dec_len, key_mask, /*causal=*/true);
    return matmul_nt(x, tok_emb);
  }

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, NdArray<Scalar>>>& out) const {
    out.emplace_back(prefix + ".pos_emb", pos_emb_);
    out.emplace_back(prefix + ".in_ln_gain", in_ln_gain_);
    out.emplace_back(prefix + ".in_ln_bias", in_ln_bias_);
    layer_.collect(prefix + ".layer0", out);
  }

 private:
  Index d_model_ = 0;
  Index max_len_ = 0;
  NdArray<Scalar> pos_emb_, in_ln_gain_, in_ln_bias_;
  TransformerLayer<Scalar> layer_;
};

}  // namespace dpr
