#include "dpr/retrieval/search.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dpr/error.hpp"

namespace dpr {

RunRanking search_topk(const EmbeddingMatrix& queries, const EmbeddingMatrix& passages, int k) {
  if (queries.dim() != passages.dim())
    throw ContractError("search_topk: query dim " + std::to_string(queries.dim()) +
                        " vs passage dim " + std::to_string(passages.dim()));
  if (k < 1) throw ContractError("search_topk: k must be >= 1");
  if (static_cast<Index>(k) > passages.count()) {
    std::cerr << "search_topk: k=" << k << " clipped to corpus size " << passages.count() << "\n";
    k = static_cast<int>(passages.count());
  }

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p64 =
      passages.vectors.cast<double>();

  RunRanking run;
  run.query_ids = queries.ids;
  run.hits.resize(queries.ids.size());
  std::vector<Index> order(static_cast<std::size_t>(passages.count()));
  Eigen::VectorXd scores(passages.count());
  for (Index q = 0; q < queries.count(); ++q) {
    const Eigen::VectorXd qv = queries.vectors.row(q).cast<double>();
    scores.noalias() = p64 * qv;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Index>(i);
    auto better = [&](Index a, Index b) {
      if (scores(a) != scores(b)) return scores(a) > scores(b);
      return passages.ids[static_cast<std::size_t>(a)] < passages.ids[static_cast<std::size_t>(b)];
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), better);
    auto& hits = run.hits[static_cast<std::size_t>(q)];
    hits.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
      hits.push_back({passages.ids[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])],
                      scores(order[static_cast<std::size_t>(i)])});
  }
  return run;
}

void RunRanking::save_trec(const std::string& path, const std::string& tag) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("run file: cannot write " + path);
  out.precision(6);
  out << std::fixed;
  for (std::size_t q = 0; q < query_ids.size(); ++q) {
    for (std::size_t i = 0; i < hits[q].size(); ++i)
      out << query_ids[q] << " Q0 " << hits[q][i].passage_id << " " << (i + 1) << " "
          << hits[q][i].score << " " << tag << "\n";
  }
}

RunRanking RunRanking::load_trec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("run file: cannot read " + path);
  RunRanking run;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, pid, tag;
    long rank;
    double score;
    if (!(ss >> qid >> q0 >> pid >> rank >> score >> tag))
      throw DataError("run file: " + path + ":" + std::to_string(line_no) + ": malformed line");
    if (run.query_ids.empty() || run.query_ids.back() != qid) {
      run.query_ids.push_back(qid);
      run.hits.emplace_back();
    }
    run.hits.back().push_back({pid, score});
  }
  return run;
}

}  // namespace dpr
