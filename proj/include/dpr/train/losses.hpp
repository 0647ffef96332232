#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dpr/core/ops.hpp"
#include "dpr/data/types.hpp"
#include "dpr/train/config.hpp"

namespace dpr {

template <typename Scalar>
struct LossValue {
  NdArray<Scalar> value;   // scalar
  Index contributing = 0;  // positions that entered the mean
  bool empty() const { return contributing == 0; }
};

// Masked-position rows (into a batch*seq_len state matrix) and their
// original-token targets.
inline std::pair<std::vector<Index>, std::vector<int>> masked_rows_and_targets(
    const MaskedBatch& batch) {
  std::vector<Index> rows;
  std::vector<int> targets;
  for (Index r = 0; r < batch.tokens.batch; ++r) {
    for (Index pos : batch.mask_positions[static_cast<std::size_t>(r)]) {
      rows.push_back(r * batch.tokens.seq_len + pos);
      targets.push_back(batch.labels[static_cast<std::size_t>(r * batch.tokens.seq_len + pos)]);
    }
  }
  return {std::move(rows), std::move(targets)};
}

// Mean cross-entropy of full-sequence MLM logits against the batch labels.
// Only masked positions carry labels, so only they contribute.
template <typename Scalar>
LossValue<Scalar> loss_mlm(const NdArray<Scalar>& mlm_logits, const MaskedBatch& batch) {
  if (mlm_logits.rows() != batch.tokens.batch * batch.tokens.seq_len)
    throw ContractError("loss_mlm: " + std::to_string(mlm_logits.rows()) + " logit rows for " +
                        std::to_string(batch.tokens.batch * batch.tokens.seq_len) + " positions");
  auto ce = cross_entropy_logits(mlm_logits, batch.labels, MaskedBatch::kIgnoreIndex);
  return {ce.loss, ce.contributing};
}

// Same objective computed the cheap way: gather masked hidden rows from one
// or more towers, project once through the tied embedding table, take the
// CE mean over all gathered positions.
template <typename Scalar>
struct MlmTower {
  const NdArray<Scalar>* states;
  const MaskedBatch* batch;
};

template <typename Scalar>
LossValue<Scalar> loss_mlm_tied(const NdArray<Scalar>& tok_emb,
                                std::span<const MlmTower<Scalar>> towers) {
  std::vector<NdArray<Scalar>> gathered;
  std::vector<int> targets;
  for (const auto& t : towers) {
    auto [rows, tgt] = masked_rows_and_targets(*t.batch);
    if (rows.empty()) continue;
    gathered.push_back(rows_gather(*t.states, rows));
    targets.insert(targets.end(), tgt.begin(), tgt.end());
  }
  if (gathered.empty()) {
    return {NdArray<Scalar>::zeros({1}), 0};
  }
  auto logits = matmul_nt(gathered.size() == 1 ? gathered.front() : concat_rows(gathered), tok_emb);
  auto ce = cross_entropy_logits<Scalar>(logits, targets, MaskedBatch::kIgnoreIndex);
  return {ce.loss, ce.contributing};
}

// Pools two mean losses into the mean over their union of positions.
template <typename Scalar>
LossValue<Scalar> combine_means(const LossValue<Scalar>& a, const LossValue<Scalar>& b) {
  const Index n = a.contributing + b.contributing;
  if (n == 0) return {NdArray<Scalar>::zeros({1}), 0};
  if (b.contributing == 0) return a;
  if (a.contributing == 0) return b;
  auto v = add(scale(a.value, Scalar(a.contributing) / Scalar(n)),
               scale(b.value, Scalar(b.contributing) / Scalar(n)));
  return {v, n};
}

// Mean next-token CE of the bottleneck decoder over the whole context
// including the closing [SEP]; padded tail positions are ignored.
template <typename Scalar>
LossValue<Scalar> loss_bottleneck_clm(const NdArray<Scalar>& decoder_logits,
                                      std::span<const int> ctx_targets) {
  if (ctx_targets.empty()) throw ContractError("loss_bottleneck_clm: empty targets");
  if (decoder_logits.rows() != static_cast<Index>(ctx_targets.size()))
    throw ContractError("loss_bottleneck_clm: " + std::to_string(decoder_logits.rows()) +
                        " logit rows for " + std::to_string(ctx_targets.size()) + " targets");
  auto ce = cross_entropy_logits(decoder_logits, ctx_targets, MaskedBatch::kIgnoreIndex);
  if (ce.contributing == 0) throw ContractError("loss_bottleneck_clm: no real targets");
  return {ce.loss, ce.contributing};
}

// The auxiliary head's masked prediction shares the MLM contract.
template <typename Scalar>
LossValue<Scalar> loss_ext(const NdArray<Scalar>& aux_logits, const MaskedBatch& batch) {
  return loss_mlm(aux_logits, batch);
}

// In-batch contrastive loss: row i of contexts is the positive for row i of
// passages, every other context row is a negative. Plain inner products,
// no temperature. The symmetric flag averages in the context-anchored
// direction as well.
template <typename Scalar>
NdArray<Scalar> loss_infonce(const NdArray<Scalar>& v_p, const NdArray<Scalar>& v_ctx,
                             bool symmetric = false) {
  if (v_p.rows() != v_ctx.rows() || v_p.cols() != v_ctx.cols())
    throw ContractError("loss_infonce: row shapes disagree: " + shape_str(v_p.shape()) + " vs " +
                        shape_str(v_ctx.shape()));
  const Index b = v_p.rows();
  if (b < 2)
    throw ContractError("loss_infonce: batch of " + std::to_string(b) +
                        " has no in-batch negatives");
  std::vector<int> diag(static_cast<std::size_t>(b));
  for (Index i = 0; i < b; ++i) diag[static_cast<std::size_t>(i)] = static_cast<int>(i);
  auto scores = matmul_nt(v_p, v_ctx);
  auto fwd = cross_entropy_logits<Scalar>(scores, diag, -1).loss;
  if (!symmetric) return fwd;
  auto rev = cross_entropy_logits<Scalar>(matmul_nt(v_ctx, v_p), diag, -1).loss;
  return scale(add(fwd, rev), Scalar(0.5));
}

// Unweighted sum of the paradigm's components: encoder MLM + decoder CLM
// for bottleneck, encoder MLM + head MLM + contrastive for contrastive.
template <typename Scalar>
NdArray<Scalar> total_loss(PretrainParadigm paradigm, const std::optional<NdArray<Scalar>>& l_enc,
                           const std::optional<NdArray<Scalar>>& l_dec,
                           const std::optional<NdArray<Scalar>>& l_ext,
                           const std::optional<NdArray<Scalar>>& l_cl) {
  if (!l_enc) throw ContractError("total_loss: encoder MLM component missing");
  if (paradigm == PretrainParadigm::bottleneck) {
    if (!l_dec) throw ContractError("total_loss: decoder CLM component missing");
    return add(*l_enc, *l_dec);
  }
  if (!l_ext || !l_cl)
    throw ContractError("total_loss: contrastive paradigm needs head and contrastive components");
  return add(add(*l_enc, *l_ext), *l_cl);
}

}  // namespace dpr
