#include "dpr/expand/store.hpp"

#include <atomic>
#include <cctype>
#include <ctime>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "dpr/error.hpp"
#include "dpr/expand/parse.hpp"

namespace dpr {

std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

nlohmann::ordered_json params_json(const GenerationParams& p) {
  nlohmann::ordered_json j;
  j["top_p"] = p.top_p;
  j["top_k"] = p.top_k;
  j["temperature"] = p.temperature;
  j["max_new_tokens"] = p.max_new_tokens;
  j["n_queries_requested"] = p.n_queries_requested;
  return j;
}

GenerationParams params_from_json(const nlohmann::json& j) {
  GenerationParams p;
  p.top_p = j.value("top_p", p.top_p);
  p.top_k = j.value("top_k", p.top_k);
  p.temperature = j.value("temperature", p.temperature);
  p.max_new_tokens = j.value("max_new_tokens", p.max_new_tokens);
  p.n_queries_requested = j.value("n_queries_requested", p.n_queries_requested);
  return p;
}

std::vector<std::string> dedup_case_insensitive(const std::vector<std::string>& in) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& q : in) {
    if (q.empty()) continue;
    std::string key = q;
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (seen.insert(key).second) out.push_back(q);
  }
  return out;
}

}  // namespace

void persist_expansions(const std::vector<ExpandedQueries>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("expansions: cannot write " + path);
  for (const auto& r : records) {
    if (r.queries.empty())
      throw DataError("expansions: record for '" + r.passage_id + "' has no queries");
    nlohmann::ordered_json j;
    j["passage_id"] = r.passage_id;
    j["queries"] = r.queries;
    j["generator"] = r.generator;
    j["params"] = params_json(r.params);
    j["created_at"] = r.created_at;
    out << j.dump() << "\n";
  }
}

LoadedExpansions load_expansions(const std::string& path, const Corpus& corpus) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("expansions: cannot read " + path);
  LoadedExpansions out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("expansions: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      ExpandedQueries r;
      r.passage_id = j.at("passage_id").get<std::string>();
      r.queries = dedup_case_insensitive(j.at("queries").get<std::vector<std::string>>());
      r.generator = j.value("generator", "unknown");
      if (j.contains("params")) r.params = params_from_json(j["params"]);
      r.created_at = j.value("created_at", "");
      if (r.queries.empty())
        throw DataError("record holds no usable queries");
      if (!corpus.contains(r.passage_id)) {
        out.orphans.push_back(r.passage_id);
        continue;
      }
      auto& dst = out.by_passage[r.passage_id];
      dst.insert(dst.end(), r.queries.begin(), r.queries.end());
      out.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("expansions: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("expansions: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<ExpandedQueries> expand_corpus_synthetic(const Corpus& corpus,
                                                     const ExpandOptions& options) {
  SyntheticExpander expander(corpus);
  GenerationParams params;
  params.n_queries_requested = options.n_queries;
  const std::string stamp = options.created_at.empty() ? utc_timestamp_now() : options.created_at;

  std::vector<ExpandedQueries> records(corpus.size());
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i = cursor.fetch_add(1); i < corpus.size(); i = cursor.fetch_add(1)) {
      const auto& p = corpus.at(i);
      auto gen = expander.generate(p, options.n_queries, options.seed);
      records[i] = {p.id, std::move(gen.queries), "synthetic", params, stamp};
    }
  };
  if (options.workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < options.workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return records;
}

std::vector<ExpandedQueries> expand_corpus_remote(const Corpus& corpus, const PromptTemplate& tpl,
                                                  RemoteGenerator& gen,
                                                  const GenerationParams& params,
                                                  const ExpandOptions& options,
                                                  long* skipped_empty) {
  const std::string stamp = options.created_at.empty() ? utc_timestamp_now() : options.created_at;
  const std::string generator_tag = "remote:" + gen.config().model_name;

  std::vector<ExpandedQueries> records(corpus.size());
  std::vector<std::uint8_t> ok(corpus.size(), 0);
  std::atomic<std::size_t> cursor{0};
  std::atomic<long> skipped{0};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (std::size_t i = cursor.fetch_add(1); i < corpus.size(); i = cursor.fetch_add(1)) {
      {
        std::lock_guard<std::mutex> lock(error_mu);
        if (first_error) return;
      }
      const auto& p = corpus.at(i);
      try {
        const std::string prompt = render_prompt(tpl, p, params.n_queries_requested);
        const std::string raw = gen.generate(prompt, params);
        auto queries = dedup_case_insensitive(parse_completion(raw));
        records[i] = {p.id, std::move(queries), generator_tag, params, stamp};
        ok[i] = 1;
      } catch (const EmptyExpansionError&) {
        skipped.fetch_add(1);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (options.workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < options.workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<ExpandedQueries> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (ok[i]) out.push_back(std::move(records[i]));
  if (skipped_empty) *skipped_empty = skipped.load();
  return out;
}

}  // namespace dpr
