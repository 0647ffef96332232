#pragma once

#include <span>
#include <vector>

#include "dpr/data/types.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/rng.hpp"

namespace dpr {

// One masked row: round(mask_ratio * n_maskable) non-special positions are
// chosen uniformly without replacement and replaced by [m] outright (no
// 80/10/10 split). labels carry the original token at masked positions and
// kIgnoreIndex elsewhere.
struct MaskedRow {
  std::vector<int> input_ids;
  std::vector<int> labels;
  std::vector<Index> mask_positions;  // sorted
  bool nothing_maskable = false;
};

MaskedRow apply_mask(std::span<const int> token_ids, double mask_ratio, Rng& rng);

// Pads rows to a common length and masks each one. Rows must already be
// [CLS] ... [SEP] sequences.
MaskedBatch make_masked_batch(const std::vector<std::vector<int>>& rows, double mask_ratio,
                              Rng& rng);

// Pads plain token rows (no masking); used for generation contexts.
TokenBatch pad_rows(const std::vector<std::vector<int>>& rows);

}  // namespace dpr
