#pragma once

#include "dpr/retrieval/metrics.hpp"
#include "dpr/train/pretrain.hpp"

namespace dpr {

struct EvalOutcome {
  RunRanking run;
  MetricReport report;
};

// Zero-shot (or post-fine-tuning) evaluation: encode the corpus with the
// passage tower and the queries with the query tower, run exact top-k
// search, then score the requested metrics against the qrels. The largest
// metric cutoff sets the search depth unless k asks for more.
template <typename Scalar>
EvalOutcome evaluate(const PretrainModel<Scalar>& model, const Corpus& corpus,
                     const std::vector<Passage>& queries, const Vocab& vocab, const Qrels& qrels,
                     const std::vector<MetricSpec>& metrics, int k = 0, int shards = 1) {
  for (const auto& m : metrics) k = std::max(k, m.k);
  if (k < 1) k = 10;
  auto passage_emb = encode_corpus(model.encoder, corpus, vocab, shards);
  auto query_emb = encode_texts(model.context_tower(), queries, vocab, shards);
  EvalOutcome out;
  out.run = search_topk(query_emb, passage_emb, k);
  out.report = compute_metrics(out.run, qrels, metrics);
  return out;
}

}  // namespace dpr
