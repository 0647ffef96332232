#pragma once

#include <string>
#include <thread>
#include <vector>

#include "dpr/data/corpus.hpp"
#include "dpr/data/masking.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/model/encoder.hpp"

namespace dpr {

// Sentence vectors for a set of texts: row i belongs to ids[i]. Always
// stored as 32-bit floats on disk regardless of model precision.
struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vectors;

  Index dim() const { return vectors.cols(); }
  Index count() const { return vectors.rows(); }

  void save(const std::string& path) const;
  static EmbeddingMatrix load(const std::string& path);
};

// Encodes each text independently (no cross-passage padding), so the output
// is identical for any shard count; shards only set the parallelism.
template <typename Scalar>
EmbeddingMatrix encode_texts(const Encoder<Scalar>& encoder, const std::vector<Passage>& texts,
                             const Vocab& vocab, int shards = 1) {
  if (shards < 1) throw ContractError("encode_texts: shards must be >= 1");
  EmbeddingMatrix out;
  out.ids.reserve(texts.size());
  for (const auto& t : texts) out.ids.push_back(t.id);
  out.vectors.resize(static_cast<Index>(texts.size()), encoder.config().d_model);

  const auto max_seq = static_cast<std::size_t>(encoder.config().max_seq_len);
  auto encode_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      std::vector<std::vector<int>> rows{tokenize(texts[i].text, vocab, max_seq)};
      auto res = encoder.encode(pad_rows(rows));
      auto v = res.h_cls().value();
      for (Index c = 0; c < v.cols(); ++c)
        out.vectors(static_cast<Index>(i), c) = static_cast<float>(v(0, c));
    }
  };

  const std::size_t n = texts.size();
  const auto workers = static_cast<std::size_t>(std::min<long>(shards, static_cast<long>(n ? n : 1)));
  if (workers <= 1) {
    encode_range(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(encode_range, lo, hi);
  }
  for (auto& t : pool) t.join();
  return out;
}

template <typename Scalar>
EmbeddingMatrix encode_corpus(const Encoder<Scalar>& encoder, const Corpus& corpus,
                              const Vocab& vocab, int shards = 1) {
  return encode_texts(encoder, corpus.passages(), vocab, shards);
}

}  // namespace dpr
