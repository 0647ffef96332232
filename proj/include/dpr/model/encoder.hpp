#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dpr/data/types.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/model/config.hpp"
#include "dpr/model/transformer_layer.hpp"

namespace dpr {

// The sentence representation: the final-layer hidden state at the [CLS]
// position, one row per sequence. No projection, no normalization.
template <typename Scalar>
struct PooledOutput {
  NdArray<Scalar> v;  // batch x d_model
};

template <typename Scalar>
struct EncodeResult {
  Index batch = 0;
  Index seq_len = 0;
  // layer_states[0] is the embedding output; layer_states[l] the output of
  // layer l (1-based)..
  std::vector<NdArray<Scalar>> layer_states;
  PooledOutput<Scalar> pooled;
  NdArray<Scalar> mlm_logits;  // (batch*seq_len) x vocab; only if requested

  const NdArray<Scalar>& h_cls() const { return pooled.v; }
};

// BERT-style encoder with CLS pooling and an MLM projection tied to the
// token embedding table (single storage, used transposed).
template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;

  Encoder(EncoderConfig cfg, Rng& rng) : cfg_(cfg) {
    cfg_.validate();
    const Scalar std = Scalar(0.02);
    tok_emb_ = NdArray<Scalar>::randn({cfg_.vocab_size, cfg_.d_model}, rng, std, true);
    pos_emb_ = NdArray<Scalar>::randn({cfg_.max_seq_len, cfg_.d_model}, rng, std, true);
    emb_ln_gain_ = NdArray<Scalar>::filled({cfg_.d_model}, Scalar(1), true);
    emb_ln_bias_ = NdArray<Scalar>::zeros({cfg_.d_model}, true);
    for (int l = 0; l < cfg_.n_layers; ++l)
      layers_.emplace_back(cfg_.d_model, cfg_.d_ff, cfg_.n_heads, rng, std);
  }

  const EncoderConfig& config() const { return cfg_; }
  const NdArray<Scalar>& token_embeddings() const { return tok_emb_; }

  EncodeResult<Scalar> encode(const TokenBatch& batch, bool want_mlm_logits = false) const {
    if (batch.seq_len > cfg_.max_seq_len)
      throw ContractError("encode: sequence of " + std::to_string(batch.seq_len) +
                          " tokens exceeds max_seq_len " + std::to_string(cfg_.max_seq_len) +
                          "; truncate before encoding");
    if (batch.batch < 1) throw ContractError("encode: empty batch");
    for (Index b = 0; b < batch.batch; ++b)
      if (batch.at(b, 0) != Vocab::kCls)
        throw ContractError("encode: row " + std::to_string(b) + " does not start with [CLS]");

    std::vector<int> pos_ids(static_cast<std::size_t>(batch.batch * batch.seq_len));
    for (Index b = 0; b < batch.batch; ++b)
      for (Index i = 0; i < batch.seq_len; ++i)
        pos_ids[static_cast<std::size_t>(b * batch.seq_len + i)] = static_cast<int>(i);

    EncodeResult<Scalar> res;
    res.batch = batch.batch;
    res.seq_len = batch.seq_len;
    auto x = layer_norm(add(embedding_lookup(tok_emb_, batch.ids),
                            embedding_lookup(pos_emb_, pos_ids)),
                        emb_ln_gain_, emb_ln_bias_);
    res.layer_states.push_back(x);
    for (const auto& layer : layers_) {
      x = layer.forward(x, batch.batch, batch.seq_len, batch.attention_mask, /*causal=*/false);
      res.layer_states.push_back(x);
    }
    std::vector<Index> cls_rows(static_cast<std::size_t>(batch.batch));
    for (Index b = 0; b < batch.batch; ++b) cls_rows[static_cast<std::size_t>(b)] = b * batch.seq_len;
    res.pooled.v = rows_gather(x, cls_rows);
    if (want_mlm_logits) res.mlm_logits = matmul_nt(x, tok_emb_);
    return res;
  }

  // MLM logits restricted to selected rows of a hidden-state matrix; the
  // projection is the transposed embedding table.
  NdArray<Scalar> mlm_logits_at(const NdArray<Scalar>& states,
                                std::span<const Index> rows) const {
    return matmul_nt(rows_gather(states, rows), tok_emb_);
  }

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, NdArray<Scalar>>>& out) const {
    out.emplace_back(prefix + ".tok_emb", tok_emb_);
    out.emplace_back(prefix + ".pos_emb", pos_emb_);
    out.emplace_back(prefix + ".emb_ln_gain", emb_ln_gain_);
    out.emplace_back(prefix + ".emb_ln_bias", emb_ln_bias_);
    for (std::size_t l = 0; l < layers_.size(); ++l)
      layers_[l].collect(prefix + ".layer" + std::to_string(l), out);
  }

 private:
  EncoderConfig cfg_;
  NdArray<Scalar> tok_emb_, pos_emb_, emb_ln_gain_, emb_ln_bias_;
  std::vector<TransformerLayer<Scalar>> layers_;
};

// Inner-product similarity between two pooled sentence vectors.
template <typename Scalar>
Scalar similarity(std::span<const Scalar> v_q, std::span<const Scalar> v_p) {
  if (v_q.size() != v_p.size())
    throw ContractError("similarity: dimension mismatch: " + std::to_string(v_q.size()) + " vs " +
                        std::to_string(v_p.size()));
  Scalar s = Scalar(0);
  for (std::size_t i = 0; i < v_q.size(); ++i) s += v_q[i] * v_p[i];
  return s;
}

}  // namespace dpr
