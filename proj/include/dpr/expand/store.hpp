#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpr/data/corpus.hpp"
#include "dpr/expand/client.hpp"
#include "dpr/expand/prompt.hpp"
#include "dpr/expand/synthetic.hpp"

namespace dpr {

// One expansion record: the pseudo-queries generated for a passage plus the
// provenance needed to reproduce them.
struct ExpandedQueries {
  std::string passage_id;
  std::vector<std::string> queries;  // non-empty, case-insensitively deduplicated
  std::string generator;             // "synthetic" or "remote:<model>"
  GenerationParams params;
  std::string created_at;  // ISO 8601
};

// Line-delimited JSON records.
void persist_expansions(const std::vector<ExpandedQueries>& records, const std::string& path);

struct LoadedExpansions {
  std::vector<ExpandedQueries> records;              // valid records, file order
  std::map<std::string, std::vector<std::string>> by_passage;  // id -> queries
  std::vector<std::string> orphans;                  // ids missing from the corpus
};

// Validates every passage id against the corpus; orphans are skipped and
// reported. Corrupt lines raise line-numbered errors.
LoadedExpansions load_expansions(const std::string& path, const Corpus& corpus);

struct ExpandOptions {
  int n_queries = 3;
  std::uint64_t seed = 42;
  int workers = 1;
  std::string created_at;  // empty: current UTC time
};

std::string utc_timestamp_now();

// Synthetic expansion over the whole corpus (always succeeds per passage).
std::vector<ExpandedQueries> expand_corpus_synthetic(const Corpus& corpus,
                                                     const ExpandOptions& options);

// Remote expansion with a worker pool; the generator's rate limit applies
// across workers. Passages whose completion parses to zero queries are
// skipped and counted in skipped_empty.
std::vector<ExpandedQueries> expand_corpus_remote(const Corpus& corpus, const PromptTemplate& tpl,
                                                  RemoteGenerator& gen,
                                                  const GenerationParams& params,
                                                  const ExpandOptions& options,
                                                  long* skipped_empty = nullptr);

}  // namespace dpr
