#include "dpr/data/masking.hpp"

#include <algorithm>
#include <cmath>

#include "dpr/error.hpp"

namespace dpr {

MaskedRow apply_mask(std::span<const int> token_ids, double mask_ratio, Rng& rng) {
  if (mask_ratio < 0.0 || mask_ratio >= 1.0)
    throw ContractError("apply_mask: mask_ratio must lie in [0, 1)");
  MaskedRow row;
  row.input_ids.assign(token_ids.begin(), token_ids.end());
  row.labels.assign(token_ids.size(), MaskedBatch::kIgnoreIndex);

  std::vector<Index> maskable;
  for (std::size_t i = 0; i < token_ids.size(); ++i)
    if (!Vocab::is_special(token_ids[i])) maskable.push_back(static_cast<Index>(i));

  if (maskable.empty()) {
    row.nothing_maskable = true;
    return row;
  }
  const auto want = static_cast<std::size_t>(
      std::lround(mask_ratio * static_cast<double>(maskable.size())));
  // Partial Fisher-Yates: the first `want` entries become the sample.
  for (std::size_t i = 0; i < want; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform(maskable.size() - i));
    std::swap(maskable[i], maskable[j]);
  }
  maskable.resize(want);
  std::sort(maskable.begin(), maskable.end());
  for (Index pos : maskable) {
    row.labels[static_cast<std::size_t>(pos)] = row.input_ids[static_cast<std::size_t>(pos)];
    row.input_ids[static_cast<std::size_t>(pos)] = Vocab::kMask;
  }
  row.mask_positions = std::move(maskable);
  return row;
}

TokenBatch pad_rows(const std::vector<std::vector<int>>& rows) {
  TokenBatch b;
  b.batch = static_cast<Index>(rows.size());
  b.seq_len = 0;
  for (const auto& r : rows) b.seq_len = std::max(b.seq_len, static_cast<Index>(r.size()));
  b.ids.assign(static_cast<std::size_t>(b.batch * b.seq_len), Vocab::kPad);
  b.attention_mask.assign(static_cast<std::size_t>(b.batch * b.seq_len), 0);
  for (Index r = 0; r < b.batch; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < row.size(); ++i) {
      b.ids[static_cast<std::size_t>(r * b.seq_len) + i] = row[i];
      b.attention_mask[static_cast<std::size_t>(r * b.seq_len) + i] = 1;
    }
  }
  return b;
}

MaskedBatch make_masked_batch(const std::vector<std::vector<int>>& rows, double mask_ratio,
                              Rng& rng) {
  if (rows.empty()) throw ContractError("make_masked_batch: no rows");
  MaskedBatch out;
  std::vector<std::vector<int>> masked_rows;
  std::vector<std::vector<int>> label_rows;
  masked_rows.reserve(rows.size());
  bool any_maskable = false;
  for (const auto& r : rows) {
    MaskedRow m = apply_mask(r, mask_ratio, rng);
    any_maskable = any_maskable || !m.nothing_maskable;
    masked_rows.push_back(std::move(m.input_ids));
    label_rows.push_back(std::move(m.labels));
    out.mask_positions.push_back(std::move(m.mask_positions));
  }
  out.tokens = pad_rows(masked_rows);
  out.labels.assign(static_cast<std::size_t>(out.tokens.batch * out.tokens.seq_len),
                    MaskedBatch::kIgnoreIndex);
  for (Index r = 0; r < out.tokens.batch; ++r) {
    const auto& lr = label_rows[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < lr.size(); ++i)
      out.labels[static_cast<std::size_t>(r * out.tokens.seq_len) + i] = lr[i];
  }
  out.empty_mask = !any_maskable;
  return out;
}

}  // namespace dpr
