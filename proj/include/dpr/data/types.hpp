#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpr/core/ndarray.hpp"

namespace dpr {

// One corpus unit. id is unique within a corpus; text is non-empty after
// whitespace trimming.
struct Passage {
  std::string id;
  std::string text;
};

// A rectangular batch of token rows. Rows are padded to seq_len with [PAD];
// attention_mask is 1 for real tokens, 0 for padding.
struct TokenBatch {
  Index batch = 0;
  Index seq_len = 0;
  std::vector<int> ids;                      // batch * seq_len, row-major
  std::vector<std::uint8_t> attention_mask;  // same layout

  int at(Index row, Index pos) const { return ids[static_cast<std::size_t>(row * seq_len + pos)]; }
};

// MLM training rows: input ids carry [m] substitutions, labels hold the
// original token exactly at the masked indices and kIgnoreIndex elsewhere.
struct MaskedBatch {
  static constexpr int kIgnoreIndex = -100;

  TokenBatch tokens;
  std::vector<int> labels;                         // batch * seq_len
  std::vector<std::vector<Index>> mask_positions;  // per row, sorted
  bool empty_mask = false;  // set when no row had anything maskable

  Index total_masked() const {
    Index n = 0;
    for (const auto& m : mask_positions) n += static_cast<Index>(m.size());
    return n;
  }
};

// An anchor span and a context span cropped from the same document.
// Token ids are body ids (no [CLS]/[SEP]); wrapping happens at batch time.
struct SpanPair {
  std::vector<int> anchor_ids;
  std::vector<int> context_ids;
};

// Aligned passage/context rows; row i of contexts is the positive for row i
// of passages and every other row serves as an in-batch negative. MLM is
// applied to both towers.
struct ContrastiveBatch {
  MaskedBatch passages;
  MaskedBatch contexts;
};

// Bottleneck pre-training rows: masked encoder input plus the unmasked
// generation context. ctx targets per row end with [SEP] then padding.
struct BottleneckBatch {
  MaskedBatch encoder_input;
  TokenBatch ctx_tokens;        // x_1..x_N rows (no [CLS]), padded
  std::vector<int> ctx_targets; // batch * (ctx seq_len + 1): x_1..x_N, [SEP], ignore on pads
};

}  // namespace dpr
