#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dpr/core/ops.hpp"

namespace dpr {

// Post-LN transformer block: self-attention then feed-forward, each followed
// by a residual add and layer norm. Shared by the encoder, the bottleneck
// decoder (causal) and the auxiliary head.
template <typename Scalar>
struct TransformerLayer {
  NdArray<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
  NdArray<Scalar> ln1_gain, ln1_bias;
  NdArray<Scalar> w_ff1, b_ff1, w_ff2, b_ff2;
  NdArray<Scalar> ln2_gain, ln2_bias;
  int n_heads = 0;

  TransformerLayer() = default;

  TransformerLayer(Index d_model, Index d_ff, int heads, Rng& rng, Scalar init_std)
      : wq(NdArray<Scalar>::randn({d_model, d_model}, rng, init_std, true)),
        bq(NdArray<Scalar>::zeros({d_model}, true)),
        wk(NdArray<Scalar>::randn({d_model, d_model}, rng, init_std, true)),
        bk(NdArray<Scalar>::zeros({d_model}, true)),
        wv(NdArray<Scalar>::randn({d_model, d_model}, rng, init_std, true)),
        bv(NdArray<Scalar>::zeros({d_model}, true)),
        wo(NdArray<Scalar>::randn({d_model, d_model}, rng, init_std, true)),
        bo(NdArray<Scalar>::zeros({d_model}, true)),
        ln1_gain(NdArray<Scalar>::filled({d_model}, Scalar(1), true)),
        ln1_bias(NdArray<Scalar>::zeros({d_model}, true)),
        w_ff1(NdArray<Scalar>::randn({d_model, d_ff}, rng, init_std, true)),
        b_ff1(NdArray<Scalar>::zeros({d_ff}, true)),
        w_ff2(NdArray<Scalar>::randn({d_ff, d_model}, rng, init_std, true)),
        b_ff2(NdArray<Scalar>::zeros({d_model}, true)),
        ln2_gain(NdArray<Scalar>::filled({d_model}, Scalar(1), true)),
        ln2_bias(NdArray<Scalar>::zeros({d_model}, true)),
        n_heads(heads) {}

  NdArray<Scalar> forward(const NdArray<Scalar>& x, Index batch, Index seq_len,
                          std::span<const std::uint8_t> key_mask, bool causal) const {
    auto q = add_rowvec(matmul(x, wq), bq);
    auto k = add_rowvec(matmul(x, wk), bk);
    auto v = add_rowvec(matmul(x, wv), bv);
    auto ctx = multi_head_attention(q, k, v, batch, seq_len, n_heads, key_mask, causal);
    auto attn = add_rowvec(matmul(ctx, wo), bo);
    auto h = layer_norm(add(x, attn), ln1_gain, ln1_bias);
    auto ff = add_rowvec(matmul(gelu(add_rowvec(matmul(h, w_ff1), b_ff1)), w_ff2), b_ff2);
    return layer_norm(add(h, ff), ln2_gain, ln2_bias);
  }

  void collect(const std::string& prefix,
               std::vector<std::pair<std::string, NdArray<Scalar>>>& out) const {
    out.emplace_back(prefix + ".wq", wq);
    out.emplace_back(prefix + ".bq", bq);
    out.emplace_back(prefix + ".wk", wk);
    out.emplace_back(prefix + ".bk", bk);
    out.emplace_back(prefix + ".wv", wv);
    out.emplace_back(prefix + ".bv", bv);
    out.emplace_back(prefix + ".wo", wo);
    out.emplace_back(prefix + ".bo", bo);
    out.emplace_back(prefix + ".ln1_gain", ln1_gain);
    out.emplace_back(prefix + ".ln1_bias", ln1_bias);
    out.emplace_back(prefix + ".w_ff1", w_ff1);
    out.emplace_back(prefix + ".b_ff1", b_ff1);
    out.emplace_back(prefix + ".w_ff2", w_ff2);
    out.emplace_back(prefix + ".b_ff2", b_ff2);
    out.emplace_back(prefix + ".ln2_gain", ln2_gain);
    out.emplace_back(prefix + ".ln2_bias", ln2_bias);
  }
};

}  // namespace dpr
