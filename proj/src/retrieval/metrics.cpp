#include "dpr/retrieval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dpr/error.hpp"

namespace dpr {

Qrels Qrels::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("qrels: cannot read " + path);
  Qrels q;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string qid, zero, pid;
    long grade;
    if (!(ss >> qid >> zero >> pid >> grade) || grade < 0)
      throw DataError("qrels: " + path + ":" + std::to_string(line_no) + ": malformed line");
    q.judgments[qid][pid] = static_cast<int>(grade);
  }
  return q;
}

void Qrels::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("qrels: cannot write " + path);
  for (const auto& [qid, judged] : judgments)
    for (const auto& [pid, grade] : judged) out << qid << " 0 " << pid << " " << grade << "\n";
}

bool Qrels::has_positive(const std::string& qid) const {
  auto it = judgments.find(qid);
  if (it == judgments.end()) return false;
  for (const auto& [pid, grade] : it->second)
    if (grade >= 1) return true;
  return false;
}

std::string MetricSpec::name() const {
  const char* base = kind == Kind::mrr ? "mrr" : kind == Kind::recall ? "recall" : "ndcg";
  return std::string(base) + "@" + std::to_string(k);
}

MetricSpec MetricSpec::parse(const std::string& text) {
  const auto at = text.find('@');
  if (at == std::string::npos)
    throw DataError("metric '" + text + "' must look like mrr@10, recall@50 or ndcg@10");
  const std::string base = text.substr(0, at);
  MetricSpec m;
  if (base == "mrr")
    m.kind = Kind::mrr;
  else if (base == "recall")
    m.kind = Kind::recall;
  else if (base == "ndcg")
    m.kind = Kind::ndcg;
  else
    throw DataError("unknown metric '" + base + "'");
  try {
    m.k = std::stoi(text.substr(at + 1));
  } catch (const std::exception&) {
    throw DataError("metric '" + text + "' has no valid cutoff");
  }
  if (m.k < 1) throw DataError("metric '" + text + "' has no valid cutoff");
  return m;
}

std::vector<MetricSpec> MetricSpec::parse_list(const std::string& csv) {
  std::vector<MetricSpec> out;
  std::string item;
  std::istringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse(item));
  }
  return out;
}

double mrr_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                int k) {
  const auto depth = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(hits[i].passage_id);
    if (it != judged.end() && it->second >= 1) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double recall_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                   int k) {
  long relevant = 0;
  for (const auto& [pid, grade] : judged)
    if (grade >= 1) ++relevant;
  if (relevant == 0) return 0.0;
  const auto depth = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(k));
  long found = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(hits[i].passage_id);
    if (it != judged.end() && it->second >= 1) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(relevant);
}

double ndcg_at_k(const std::vector<SearchHit>& hits, const std::map<std::string, int>& judged,
                 int k) {
  const auto depth = std::min<std::size_t>(hits.size(), static_cast<std::size_t>(k));
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = judged.find(hits[i].passage_id);
    if (it == judged.end() || it->second <= 0) continue;
    dcg += (std::pow(2.0, it->second) - 1.0) / std::log2(static_cast<double>(i + 2));
  }
  std::vector<int> grades;
  for (const auto& [pid, grade] : judged)
    if (grade > 0) grades.push_back(grade);
  std::sort(grades.begin(), grades.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < grades.size() && i < static_cast<std::size_t>(k); ++i)
    idcg += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i + 2));
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

MetricReport compute_metrics(const RunRanking& run, const Qrels& qrels,
                             const std::vector<MetricSpec>& metrics) {
  MetricReport report;
  for (const auto& m : metrics) report.metric_names.push_back(m.name());

  for (std::size_t q = 0; q < run.query_ids.size(); ++q) {
    const std::string& qid = run.query_ids[q];
    auto it = qrels.judgments.find(qid);
    if (it == qrels.judgments.end() || !qrels.has_positive(qid)) {
      report.excluded_queries.push_back(qid);
      continue;
    }
    ++report.evaluated_queries;
    for (const auto& m : metrics) {
      double v = 0.0;
      switch (m.kind) {
        case MetricSpec::Kind::mrr: v = mrr_at_k(run.hits[q], it->second, m.k); break;
        case MetricSpec::Kind::recall: v = recall_at_k(run.hits[q], it->second, m.k); break;
        case MetricSpec::Kind::ndcg: v = ndcg_at_k(run.hits[q], it->second, m.k); break;
      }
      report.per_query[m.name()][qid] = v;
    }
  }
  for (const auto& m : metrics) {
    double total = 0.0;
    for (const auto& [qid, v] : report.per_query[m.name()]) total += v;
    report.means[m.name()] =
        report.evaluated_queries > 0 ? total / static_cast<double>(report.evaluated_queries) : 0.0;
  }
  return report;
}

void MetricReport::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("metric report: cannot write " + path);
  nlohmann::ordered_json header;
  header["record"] = "summary";
  header["checkpoint"] = checkpoint_id;
  header["evaluated_queries"] = evaluated_queries;
  header["excluded_queries"] = excluded_queries;
  nlohmann::ordered_json means_obj;
  for (const auto& name : metric_names) means_obj[name] = means.at(name);
  header["means"] = means_obj;
  out << header.dump() << "\n";
  for (const auto& name : metric_names) {
    for (const auto& [qid, v] : per_query.at(name)) {
      nlohmann::ordered_json rec;
      rec["record"] = "query";
      rec["metric"] = name;
      rec["query_id"] = qid;
      rec["value"] = v;
      out << rec.dump() << "\n";
    }
  }
}

std::string MetricReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "metric" << std::right << std::setw(10) << "mean" << "\n";
  for (const auto& name : metric_names) {
    os << std::left << std::setw(12) << name << std::right << std::setw(10) << std::fixed
       << std::setprecision(4) << means.at(name) << "\n";
  }
  os << "queries evaluated: " << evaluated_queries;
  if (!excluded_queries.empty()) os << "  (excluded: " << excluded_queries.size() << ")";
  os << "\n";
  return os.str();
}

}  // namespace dpr
