#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "dpr/retrieval/search.hpp"

namespace dpr {

// Relevance judgments: query id -> passage id -> grade >= 0. Grades >= 1
// count as relevant for the binary metrics.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;

  // TREC qrels format: qid 0 pid grade.
  static Qrels load(const std::string& path);
  void save(const std::string& path) const;

  bool has_positive(const std::string& qid) const;
};

struct MetricSpec {
  enum class Kind { mrr, recall, ndcg };
  Kind kind = Kind::mrr;
  int k = 10;

  std::string name() const;
  // Accepts mrr@K, recall@K, ndcg@K.
  static MetricSpec parse(const std::string& text);
  static std::vector<MetricSpec> parse_list(const std::string& comma_separated);
};

// Per-metric means with the per-query breakdown. Queries missing from the
// qrels or judged with no positive are excluded and listed.
struct MetricReport {
  std::vector<std::string> metric_names;
  std::map<std::string, double> means;
  std::map<std::string, std::map<std::string, double>> per_query;
  long evaluated_queries = 0;
  std::vector<std::string> excluded_queries;
  std::string checkpoint_id;

  void save(const std::string& path) const;  // line-delimited records
  std::string table() const;                 // human-readable summary
};

double mrr_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                int k);
double recall_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                   int k);
double ndcg_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                 int k);

MetricReport compute_metrics(const RunRanking& run, const Qrels& qrels,
                             const std::vector<MetricSpec>& metrics);

}  // namespace dpr
