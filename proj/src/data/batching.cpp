#include "dpr/data/batching.hpp"

#include <algorithm>

#include "dpr/error.hpp"

namespace dpr {

namespace {

std::vector<int> wrap_specials(std::span<const int> body, std::size_t max_seq_len) {
  const std::size_t keep = std::min(body.size(), max_seq_len - 2);
  std::vector<int> out;
  out.reserve(keep + 2);
  out.push_back(Vocab::kCls);
  out.insert(out.end(), body.begin(), body.begin() + static_cast<std::ptrdiff_t>(keep));
  out.push_back(Vocab::kSep);
  return out;
}

}  // namespace

SpanPair sample_coarse_span(std::span<const int> document_ids, SpanLenRange range, Rng& rng,
                            SpanMode mode) {
  if (range.lo < 1 || range.hi < range.lo)
    throw ContractError("sample_coarse_span: bad span length range");
  const Index n = static_cast<Index>(document_ids.size());
  SpanPair pair;
  pair.anchor_ids.assign(document_ids.begin(), document_ids.end());
  if (mode == SpanMode::self) {
    pair.context_ids = pair.anchor_ids;
    return pair;
  }
  if (n < range.lo)
    throw DataError("sample_coarse_span: document of " + std::to_string(n) +
                    " tokens is shorter than the minimum span of " + std::to_string(range.lo));
  const Index len = std::min<Index>(rng.uniform_range(range.lo, range.hi), n);
  const Index start = static_cast<Index>(rng.uniform(static_cast<std::uint64_t>(n - len + 1)));
  pair.context_ids.assign(document_ids.begin() + start, document_ids.begin() + start + len);
  return pair;
}

ContrastiveBatch make_contrastive_batch(const std::vector<SpanPair>& pairs, double mask_ratio,
                                        Rng& rng, std::size_t max_seq_len) {
  if (pairs.size() < 2)
    throw ContractError("make_contrastive_batch: need at least 2 pairs for in-batch negatives, got " +
                        std::to_string(pairs.size()));
  std::vector<std::vector<int>> anchor_rows;
  std::vector<std::vector<int>> ctx_rows;
  anchor_rows.reserve(pairs.size());
  ctx_rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    anchor_rows.push_back(wrap_specials(p.anchor_ids, max_seq_len));
    ctx_rows.push_back(wrap_specials(p.context_ids, max_seq_len));
  }
  ContrastiveBatch out;
  out.passages = make_masked_batch(anchor_rows, mask_ratio, rng);
  out.contexts = make_masked_batch(ctx_rows, mask_ratio, rng);
  return out;
}

BottleneckBatch make_bottleneck_batch(const std::vector<std::vector<int>>& passage_bodies,
                                      const std::vector<std::vector<int>>& ctx_bodies,
                                      double mask_ratio, Rng& rng, std::size_t max_seq_len) {
  if (passage_bodies.empty() || passage_bodies.size() != ctx_bodies.size())
    throw ContractError("make_bottleneck_batch: passage/context rows must align");
  std::vector<std::vector<int>> enc_rows;
  enc_rows.reserve(passage_bodies.size());
  for (const auto& b : passage_bodies) enc_rows.push_back(wrap_specials(b, max_seq_len));

  std::vector<std::vector<int>> ctx_rows;
  ctx_rows.reserve(ctx_bodies.size());
  for (const auto& b : ctx_bodies) {
    if (b.empty()) throw ContractError("make_bottleneck_batch: empty generation context");
    std::vector<int> row(b.begin(),
                         b.begin() + static_cast<std::ptrdiff_t>(
                                         std::min(b.size(), max_seq_len - 1)));
    ctx_rows.push_back(std::move(row));
  }

  BottleneckBatch out;
  out.encoder_input = make_masked_batch(enc_rows, mask_ratio, rng);
  out.ctx_tokens = pad_rows(ctx_rows);
  // Decoder sees [h_cls, x_1..x_N]: one extra position per row, so targets
  // run x_1..x_N then [SEP].
  const Index tgt_len = out.ctx_tokens.seq_len + 1;
  out.ctx_targets.assign(static_cast<std::size_t>(out.ctx_tokens.batch * tgt_len),
                         MaskedBatch::kIgnoreIndex);
  for (Index r = 0; r < out.ctx_tokens.batch; ++r) {
    const auto& row = ctx_rows[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < row.size(); ++i)
      out.ctx_targets[static_cast<std::size_t>(r * tgt_len) + i] = row[i];
    out.ctx_targets[static_cast<std::size_t>(r * tgt_len) + row.size()] = Vocab::kSep;
  }
  return out;
}

}  // namespace dpr
