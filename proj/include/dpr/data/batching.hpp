#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dpr/data/masking.hpp"
#include "dpr/data/types.hpp"

namespace dpr {

enum class SpanMode { cropped, self };

struct SpanLenRange {
  Index lo = 32;
  Index hi = 96;
};

// Crops a coarse-grained context from a tokenized document: the span length
// is uniform over the range (clipped at the document length) and the start
// offset uniform over the valid positions. mode self returns the document
// itself as its own context.
SpanPair sample_coarse_span(std::span<const int> document_ids, SpanLenRange range, Rng& rng,
                            SpanMode mode = SpanMode::cropped);

// Wraps aligned (anchor, context) body-token pairs with [CLS]/[SEP], pads
// each tower and masks both at mask_ratio. Requires at least two pairs:
// with a single row there are no in-batch negatives.
ContrastiveBatch make_contrastive_batch(const std::vector<SpanPair>& pairs, double mask_ratio,
                                        Rng& rng, std::size_t max_seq_len);

// Builds bottleneck rows: masked passage input for the encoder and the
// unmasked context tokens for the decoder. Targets predict x_1..x_N then
// [SEP]; padded tail positions are ignored.
BottleneckBatch make_bottleneck_batch(const std::vector<std::vector<int>>& passage_bodies,
                                      const std::vector<std::vector<int>>& ctx_bodies,
                                      double mask_ratio, Rng& rng, std::size_t max_seq_len);

}  // namespace dpr
