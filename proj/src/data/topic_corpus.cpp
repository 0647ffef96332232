#include "dpr/data/topic_corpus.hpp"

#include <algorithm>
#include <set>

#include "dpr/error.hpp"
#include "dpr/expand/synthetic.hpp"

namespace dpr {

namespace {

const char* kSyllables[] = {"ba", "ke", "li", "mo", "nu", "pa", "re", "si", "to", "vu",
                            "za", "de", "fi", "go", "hu", "ja", "ce", "wi", "xo", "yu"};
constexpr std::size_t kNumSyllables = sizeof(kSyllables) / sizeof(kSyllables[0]);

// Unique pronounceable word for a global index: three base-20 syllables.
std::string word_for_index(std::size_t idx) {
  std::string w;
  for (int d = 0; d < 3; ++d) {
    w += kSyllables[idx % kNumSyllables];
    idx /= kNumSyllables;
  }
  return w;
}

const char* kFillers[] = {"the", "and", "of", "in", "on", "with", "for", "at", "by", "from"};
constexpr std::size_t kNumFillers = sizeof(kFillers) / sizeof(kFillers[0]);

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

TopicBenchmark make_topic_benchmark(const TopicCorpusConfig& cfg) {
  if (cfg.n_topics < 2) throw ContractError("topic benchmark: need at least 2 topics");
  if (cfg.n_passages < cfg.n_topics)
    throw ContractError("topic benchmark: need at least one passage per topic");

  TopicBenchmark bench;
  Rng rng = Rng(cfg.seed).fork(0x70b1c);

  // Topic vocabularies: either disjoint, or sampled without replacement
  // from a shared pool so that topics overlap. Common words follow.
  std::vector<std::vector<std::string>> topic_words(static_cast<std::size_t>(cfg.n_topics));
  std::size_t word_idx = 0;
  if (cfg.word_pool_size > 0) {
    if (cfg.word_pool_size < cfg.words_per_topic)
      throw ContractError("topic benchmark: word pool smaller than words_per_topic");
    std::vector<std::string> pool;
    for (int w = 0; w < cfg.word_pool_size; ++w) pool.push_back(word_for_index(word_idx++));
    for (int t = 0; t < cfg.n_topics; ++t) {
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      for (int w = 0; w < cfg.words_per_topic; ++w) {
        const std::size_t j =
            static_cast<std::size_t>(w) + static_cast<std::size_t>(rng.uniform(idx.size() - w));
        std::swap(idx[static_cast<std::size_t>(w)], idx[j]);
        topic_words[static_cast<std::size_t>(t)].push_back(pool[idx[static_cast<std::size_t>(w)]]);
      }
    }
  } else {
    for (int t = 0; t < cfg.n_topics; ++t)
      for (int w = 0; w < cfg.words_per_topic; ++w)
        topic_words[static_cast<std::size_t>(t)].push_back(word_for_index(word_idx++));
  }
  std::vector<std::string> common;
  for (int w = 0; w < cfg.common_words; ++w) common.push_back(word_for_index(word_idx++));

  // Passages: topic assigned round-robin so every topic is populated, then
  // shuffled composition per passage.
  for (int i = 0; i < cfg.n_passages; ++i) {
    const int topic = i % cfg.n_topics;
    bench.passage_topic.push_back(topic);
    const long len = rng.uniform_range(cfg.passage_len_lo, cfg.passage_len_hi);
    std::string text;
    for (long w = 0; w < len; ++w) {
      std::string word;
      if (rng.uniform_real() < cfg.topic_word_prob) {
        const auto& tw = topic_words[static_cast<std::size_t>(topic)];
        word = tw[static_cast<std::size_t>(rng.uniform(tw.size()))];
      } else if (rng.uniform_real() < 0.5) {
        word = common[static_cast<std::size_t>(rng.uniform(common.size()))];
      } else {
        word = kFillers[static_cast<std::size_t>(rng.uniform(kNumFillers))];
      }
      if (!text.empty()) text.push_back(' ');
      text += word;
    }
    bench.corpus.add({"p" + zero_pad(i, 5), text});
  }

  // Queries mimic what a user would ask about the source passage. They come
  // from the same skeleton process as the synthetic document expander (the
  // paper's setting: pre-training queries and evaluation queries share a
  // linguistic style) but under an independent seed, with optional noise
  // words from foreign topics.
  SyntheticExpander query_maker(bench.corpus);
  const std::uint64_t query_seed = Rng::splitmix(cfg.seed ^ 0x5eed);
  auto make_query = [&](int source_idx) {
    const auto& p = bench.corpus.at(static_cast<std::size_t>(source_idx));
    const int topic = bench.passage_topic[static_cast<std::size_t>(source_idx)];
    std::string q = query_maker.generate(p, 1, query_seed).queries.front();
    if (cfg.n_topics > 1 && cfg.query_noise_prob > 0 &&
        rng.uniform_real() < cfg.query_noise_prob) {
      int other = topic;
      while (other == topic)
        other = static_cast<int>(rng.uniform(static_cast<std::uint64_t>(cfg.n_topics)));
      const auto& tw = topic_words[static_cast<std::size_t>(other)];
      q += " " + tw[static_cast<std::size_t>(rng.uniform(tw.size()))];
    }
    return q;
  };

  std::vector<std::size_t> passage_pool(bench.corpus.size());
  for (std::size_t i = 0; i < passage_pool.size(); ++i) passage_pool[i] = i;
  // One shared shuffle; eval queries take the front, train queries follow,
  // so their source passages never overlap.
  for (std::size_t i = 0; i + 1 < passage_pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform(passage_pool.size() - i));
    std::swap(passage_pool[i], passage_pool[j]);
  }
  const int want_total = cfg.n_queries + cfg.n_train_queries;
  if (want_total > static_cast<int>(passage_pool.size()))
    throw ContractError("topic benchmark: more queries requested than passages available");

  for (int i = 0; i < cfg.n_queries; ++i) {
    const auto src = static_cast<int>(passage_pool[static_cast<std::size_t>(i)]);
    const std::string qid = "q" + zero_pad(i, 4);
    bench.queries.push_back({qid, make_query(src)});
    const int topic = bench.passage_topic[static_cast<std::size_t>(src)];
    std::vector<std::size_t> same_topic;
    for (std::size_t p = 0; p < bench.corpus.size(); ++p)
      if (bench.passage_topic[p] == topic && p != static_cast<std::size_t>(src))
        same_topic.push_back(p);
    if (cfg.judged_per_query > 0) {
      const auto picks = std::min<std::size_t>(same_topic.size(),
                                               static_cast<std::size_t>(cfg.judged_per_query - 1));
      for (std::size_t k = 0; k < picks; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.uniform(same_topic.size() - k));
        std::swap(same_topic[k], same_topic[j]);
      }
      same_topic.resize(picks);
    }
    for (std::size_t p : same_topic) bench.qrels.judgments[qid][bench.corpus.at(p).id] = 1;
    bench.qrels.judgments[qid][bench.corpus.at(static_cast<std::size_t>(src)).id] = 2;
  }

  for (int i = 0; i < cfg.n_train_queries; ++i) {
    const auto src =
        static_cast<int>(passage_pool[static_cast<std::size_t>(cfg.n_queries + i)]);
    const int topic = bench.passage_topic[static_cast<std::size_t>(src)];
    FinetuneTriple t;
    t.query = make_query(src);
    t.positive_id = bench.corpus.at(static_cast<std::size_t>(src)).id;
    while (static_cast<int>(t.negative_ids.size()) < cfg.negatives_per_triple) {
      const auto cand = static_cast<std::size_t>(rng.uniform(bench.corpus.size()));
      if (bench.passage_topic[cand] == topic) continue;
      t.negative_ids.push_back(bench.corpus.at(cand).id);
    }
    bench.triples.push_back(std::move(t));
  }
  return bench;
}

}  // namespace dpr
