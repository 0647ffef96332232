#include "dpr/expand/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "dpr/data/vocab.hpp"
#include "dpr/digest.hpp"
#include "dpr/error.hpp"

namespace dpr {

bool is_stopword(const std::string& token) {
  static const std::unordered_set<std::string> kStopwords = {
      "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",   "for", "from",
      "has",  "have", "he",   "her",  "his",  "in",   "is",   "it",   "its", "of",
      "on",   "or",   "she",  "that", "the",  "their", "they", "this", "to",  "was",
      "were", "what", "when", "where", "which", "who",  "will", "with", "how", "does"};
  return kStopwords.count(token) != 0;
}

SyntheticExpander::SyntheticExpander(const Corpus& corpus) : n_docs_(static_cast<long>(corpus.size())) {
  for (const auto& p : corpus.passages()) {
    std::set<std::string> seen;
    for (auto& t : word_tokens(p.text)) seen.insert(t);
    for (const auto& t : seen) doc_freq_[t] += 1;
  }
}

SyntheticExpander::Result SyntheticExpander::generate(const Passage& passage, int n,
                                                      std::uint64_t seed) const {
  if (n < 1) throw ContractError("generate_synthetic: n must be >= 1");
  Result out;

  std::unordered_map<std::string, long> tf;
  std::vector<std::string> order;  // first-appearance order for stable ties
  for (auto& t : word_tokens(passage.text)) {
    if (tf[t]++ == 0) order.push_back(t);
  }

  struct Term {
    std::string text;
    double score;
    std::uint64_t tie;
  };
  std::vector<Term> terms;
  for (const auto& t : order) {
    if (is_stopword(t) || t.size() < 2) continue;
    auto it = doc_freq_.find(t);
    const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
    const double idf = std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df));
    terms.push_back({t, static_cast<double>(tf[t]) * idf, 0});
  }
  std::stable_sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });

  if (terms.empty()) {
    // No content terms: fall back to the first tokens of the passage.
    auto toks = word_tokens(passage.text);
    std::string q;
    for (std::size_t i = 0; i < toks.size() && i < 5; ++i) {
      if (!q.empty()) q.push_back(' ');
      q += toks[i];
    }
    if (q.empty()) q = passage.text;
    out.queries.push_back(q);
    out.shortfall = n > 1;
    return out;
  }
  if (terms.size() > 8) terms.resize(8);

  Rng rng = Rng(seed).fork(fnv1a(passage.id.data(), passage.id.size()));
  std::set<std::string> seen_lower;
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  auto pick_terms = [&](std::size_t want) {
    std::vector<std::size_t> idx(terms.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < want && i < idx.size(); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(want, idx.size()));
    std::vector<std::string> picked;
    for (auto i : idx) picked.push_back(terms[i].text);
    return picked;
  };

  const int attempts = 4 * n + 4;
  for (int a = 0; a < attempts && static_cast<int>(out.queries.size()) < n; ++a) {
    const auto skeleton = rng.uniform(3);
    std::string q;
    if (skeleton == 0) {
      q = "what is " + pick_terms(1)[0];
    } else if (skeleton == 1) {
      auto t = pick_terms(2);
      q = t.size() >= 2 ? "how does " + t[0] + " relate to " + t[1] : "what is " + t[0];
    } else {
      auto t = pick_terms(3);
      for (const auto& w : t) {
        if (!q.empty()) q.push_back(' ');
        q += w;
      }
    }
    if (seen_lower.insert(lower(q)).second) out.queries.push_back(q);
  }
  out.shortfall = static_cast<int>(out.queries.size()) < n;
  return out;
}

}  // namespace dpr
