#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dpr/data/corpus.hpp"
#include "dpr/rng.hpp"

namespace dpr {

// Offline stand-in for a completion endpoint: ranks passage terms by
// tf-idf against the corpus and fills query skeletons from the top terms.
// Deterministic per (passage id, n, seed), independent of call order.
class SyntheticExpander {
 public:
  explicit SyntheticExpander(const Corpus& corpus);

  struct Result {
    std::vector<std::string> queries;
    bool shortfall = false;  // fewer than n distinct queries could be formed
  };

  Result generate(const Passage& passage, int n, std::uint64_t seed) const;

 private:
  std::unordered_map<std::string, long> doc_freq_;
  long n_docs_ = 0;
};

bool is_stopword(const std::string& token);

}  // namespace dpr
