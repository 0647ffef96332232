#pragma once

#include <string>
#include <vector>

#include "dpr/retrieval/embedding.hpp"

namespace dpr {

struct SearchHit {
  std::string passage_id;
  double score = 0.0;
};

// Ranked output: hits[i] belongs to query_ids[i], sorted by descending
// score with ties broken by ascending passage id.
struct RunRanking {
  std::vector<std::string> query_ids;
  std::vector<std::vector<SearchHit>> hits;

  // TREC run format: qid Q0 pid rank score tag.
  void save_trec(const std::string& path, const std::string& tag) const;
  static RunRanking load_trec(const std::string& path);
};

// Exact top-k inner-product search; scores are accumulated in double. k
// larger than the corpus is clipped (a notice goes to stderr).
RunRanking search_topk(const EmbeddingMatrix& queries, const EmbeddingMatrix& passages, int k);

}  // namespace dpr
