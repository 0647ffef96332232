#pragma once

#include <string>
#include <vector>

#include "dpr/data/corpus.hpp"
#include "dpr/retrieval/metrics.hpp"
#include "dpr/rng.hpp"
#include "dpr/train/finetune.hpp"

namespace dpr {

// Generator settings for the synthetic topic benchmark: passages drawn from
// latent topics over an invented syllabic vocabulary, held-out queries asked
// about a source passage, qrels judging the source passage (grade 2) plus a
// seeded sample of same-topic passages (grade 1).
struct TopicCorpusConfig {
  int n_passages = 2000;
  int n_topics = 50;
  int n_queries = 200;        // held-out evaluation queries
  int n_train_queries = 300;  // used to build fine-tuning triples
  int words_per_topic = 25;
  // 0: every topic gets its own disjoint vocabulary. > 0: topic words are
  // drawn from a shared pool of this size, so topics overlap and become
  // confusable.
  int word_pool_size = 0;
  int common_words = 60;
  int passage_len_lo = 40;
  int passage_len_hi = 70;
  double topic_word_prob = 0.7;
  // A foreign-topic noise word is appended to a held-out query with this
  // probability.
  double query_noise_prob = 0.0;
  // Judged passages per query. Incomplete judgments are the IR norm and keep
  // MRR away from its ceiling on strong checkpoints, where trends would
  // vanish. 0 judges every same-topic passage.
  int judged_per_query = 10;
  int negatives_per_triple = 4;
  std::uint64_t seed = 42;
};

struct TopicBenchmark {
  Corpus corpus;
  std::vector<Passage> queries;  // held-out; id -> query text
  Qrels qrels;
  std::vector<FinetuneTriple> triples;  // train split, never overlaps queries
  std::vector<int> passage_topic;       // topic index per corpus position
};

TopicBenchmark make_topic_benchmark(const TopicCorpusConfig& cfg);

}  // namespace dpr
