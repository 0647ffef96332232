#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "dpr/data/batching.hpp"
#include "dpr/data/corpus.hpp"
#include "dpr/data/topic_corpus.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/digest.hpp"

using namespace dpr;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpr_test_" + name)).string();
}

}  // namespace

TEST_CASE("vocab ranks by frequency with lexicographic ties") {
  std::vector<Passage> corpus{{"1", "a b b"}};
  auto v = Vocab::build(corpus, 100);
  CHECK(v.token(Vocab::kNumSpecials) == "b");
  CHECK(v.token(Vocab::kNumSpecials + 1) == "a");

  auto capped = Vocab::build(corpus, 6);
  CHECK(capped.size() == 6);  // 5 specials + 1 body token
  CHECK(capped.id("b") == Vocab::kNumSpecials);
  CHECK(capped.id("a") == Vocab::kUnk);
}

TEST_CASE("vocab build is deterministic byte for byte") {
  std::vector<Passage> corpus{{"1", "red green blue"}, {"2", "green blue green"}};
  const auto p1 = tmp_path("vocab1.txt");
  const auto p2 = tmp_path("vocab2.txt");
  Vocab::build(corpus, 50).save(p1);
  Vocab::build(corpus, 50).save(p2);
  CHECK(file_digest(p1) == file_digest(p2));
  auto loaded = Vocab::load(p1);
  CHECK(loaded.id("green") == Vocab::build(corpus, 50).id("green"));
}

TEST_CASE("tokenize wraps, truncates and falls back to [UNK]") {
  std::vector<Passage> corpus{{"1", "alpha beta gamma"}};
  auto v = Vocab::build(corpus, 100);

  auto empty = tokenize("", v, 16);
  CHECK(empty == std::vector<int>{Vocab::kCls, Vocab::kSep});

  auto oov = tokenize("alpha zeta", v, 16);
  CHECK(oov[1] == v.id("alpha"));
  CHECK(oov[2] == Vocab::kUnk);

  std::string longtext;
  for (int i = 0; i < 500; ++i) longtext += "alpha ";
  auto truncated = tokenize(longtext, v, 128);
  CHECK(truncated.size() == 128);
  CHECK(truncated.front() == Vocab::kCls);
  CHECK(truncated.back() == Vocab::kSep);
}

TEST_CASE("tokenize then detokenize is the identity on in-vocab text") {
  std::vector<Passage> corpus{{"1", "alpha beta gamma delta"}};
  auto v = Vocab::build(corpus, 100);
  const std::string text = "gamma alpha alpha delta";
  auto ids = tokenize(text, v, 32);
  CHECK(detokenize(ids, v) == text);
  auto again = tokenize(detokenize(ids, v), v, 32);
  CHECK(again == ids);
}

TEST_CASE("corpus loads both tsv and jsonl and reports bad lines") {
  const auto tsv = tmp_path("corpus.tsv");
  {
    std::ofstream f(tsv);
    f << "p1\thello world\np2\tanother passage\n";
  }
  auto c = Corpus::load(tsv);
  CHECK(c.size() == 2);
  CHECK(c.find("p2")->text == "another passage");

  const auto jsonl = tmp_path("corpus.jsonl");
  {
    std::ofstream f(jsonl);
    f << R"({"id": "x", "text": "json text"})" << "\n";
  }
  CHECK(Corpus::load(jsonl).find("x")->text == "json text");

  const auto bad = tmp_path("corpus_bad.tsv");
  {
    std::ofstream f(bad);
    f << "p1\tok\nno-tab-here\n";
  }
  CHECK_THROWS_WITH_AS(Corpus::load(bad), doctest::Contains(":2"), DataError);

  const auto dup = tmp_path("corpus_dup.tsv");
  {
    std::ofstream f(dup);
    f << "p1\ta\np1\tb\n";
  }
  CHECK_THROWS_AS(Corpus::load(dup), DataError);
}

TEST_CASE("apply_mask hits the requested ratio and only non-specials") {
  std::vector<int> row{Vocab::kCls, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, Vocab::kSep};
  Rng rng(21);
  auto m = apply_mask(row, 0.3, rng);
  CHECK(m.mask_positions.size() == 3);  // round(0.3 * 10)
  for (Index pos : m.mask_positions) {
    CHECK(m.input_ids[static_cast<std::size_t>(pos)] == Vocab::kMask);
    CHECK(m.labels[static_cast<std::size_t>(pos)] == row[static_cast<std::size_t>(pos)]);
    CHECK_FALSE(Vocab::is_special(row[static_cast<std::size_t>(pos)]));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    const bool masked = m.input_ids[i] == Vocab::kMask;
    const bool labeled = m.labels[i] != MaskedBatch::kIgnoreIndex;
    CHECK(masked == labeled);
  }
}

TEST_CASE("apply_mask edge cases: zero ratio, nothing maskable, determinism") {
  std::vector<int> row{Vocab::kCls, 10, 11, Vocab::kSep};
  Rng rng(22);
  auto none = apply_mask(row, 0.0, rng);
  CHECK(none.mask_positions.empty());
  for (int l : none.labels) CHECK(l == MaskedBatch::kIgnoreIndex);

  std::vector<int> specials_only{Vocab::kCls, Vocab::kSep};
  auto degenerate = apply_mask(specials_only, 0.5, rng);
  CHECK(degenerate.nothing_maskable);
  CHECK(degenerate.mask_positions.empty());

  Rng r1(99), r2(99);
  auto a = apply_mask(row, 0.5, r1);
  auto b = apply_mask(row, 0.5, r2);
  CHECK(a.mask_positions == b.mask_positions);

  CHECK_THROWS_AS(apply_mask(row, 1.0, rng), ContractError);
}

TEST_CASE("masked batch keeps labels aligned with mask positions under padding") {
  std::vector<std::vector<int>> rows{{Vocab::kCls, 10, 11, 12, 13, 14, 15, 16, Vocab::kSep},
                                     {Vocab::kCls, 20, 21, Vocab::kSep}};
  Rng rng(23);
  auto batch = make_masked_batch(rows, 0.4, rng);
  CHECK(batch.tokens.batch == 2);
  CHECK(batch.tokens.seq_len == 9);
  for (Index r = 0; r < 2; ++r) {
    for (Index i = 0; i < batch.tokens.seq_len; ++i) {
      const auto flat = static_cast<std::size_t>(r * batch.tokens.seq_len + i);
      const bool masked = batch.tokens.ids[flat] == Vocab::kMask;
      const bool labeled = batch.labels[flat] != MaskedBatch::kIgnoreIndex;
      CHECK(masked == labeled);
    }
  }
  // padded tail of the short row is PAD with attention 0
  CHECK(batch.tokens.ids[9 + 4] == Vocab::kPad);
  CHECK(batch.tokens.attention_mask[9 + 4] == 0);
}

TEST_CASE("span sampling respects the length range and start bounds") {
  std::vector<int> doc(100);
  for (int i = 0; i < 100; ++i) doc[static_cast<std::size_t>(i)] = 10 + i;
  Rng rng(24);
  for (int trial = 0; trial < 50; ++trial) {
    auto pair = sample_coarse_span(doc, {20, 20}, rng);
    CHECK(pair.context_ids.size() == 20);
    // span content identifies its start offset
    const int start = pair.context_ids.front() - 10;
    CHECK(start >= 0);
    CHECK(start <= 80);
    CHECK(pair.anchor_ids.size() == 100);
  }

  auto self = sample_coarse_span(doc, {20, 20}, rng, SpanMode::self);
  CHECK(self.context_ids == self.anchor_ids);

  std::vector<int> tiny(5, 7);
  CHECK_THROWS_AS(sample_coarse_span(tiny, {20, 20}, rng), DataError);
}

TEST_CASE("span starts cover nearly all valid offsets over many draws") {
  std::vector<int> doc(100);
  for (int i = 0; i < 100; ++i) doc[static_cast<std::size_t>(i)] = 10 + i;
  Rng rng(25);
  std::set<int> starts;
  for (int trial = 0; trial < 10000; ++trial) {
    auto pair = sample_coarse_span(doc, {20, 20}, rng);
    starts.insert(pair.context_ids.front() - 10);
  }
  CHECK(static_cast<double>(starts.size()) >= 0.95 * 81.0);
}

TEST_CASE("contrastive batches need two pairs and mask both towers") {
  std::vector<SpanPair> one{{{10, 11, 12}, {10, 11}}};
  Rng rng(26);
  CHECK_THROWS_AS(make_contrastive_batch(one, 0.3, rng, 32), ContractError);

  std::vector<SpanPair> pairs{{{10, 11, 12, 13, 14, 15}, {10, 11, 12}},
                              {{20, 21, 22, 23, 24, 25}, {23, 24, 25}}};
  auto batch = make_contrastive_batch(pairs, 0.5, rng, 32);
  CHECK(batch.passages.tokens.batch == 2);
  CHECK(batch.contexts.tokens.batch == 2);
  CHECK(batch.passages.total_masked() > 0);
  CHECK(batch.contexts.total_masked() > 0);
}

TEST_CASE("bottleneck batches leave the generation context unmasked, sep-terminated") {
  std::vector<std::vector<int>> passages{{10, 11, 12, 13}, {20, 21, 22, 23}};
  std::vector<std::vector<int>> ctxs{{30, 31, 32}, {40, 41}};
  Rng rng(27);
  auto batch = make_bottleneck_batch(passages, ctxs, 0.5, rng, 32);
  // context rows carry the raw tokens
  CHECK(batch.ctx_tokens.at(0, 0) == 30);
  CHECK(batch.ctx_tokens.at(1, 1) == 41);
  const Index tgt_len = batch.ctx_tokens.seq_len + 1;
  CHECK(batch.ctx_targets[static_cast<std::size_t>(0 * tgt_len + 2)] == 32);
  CHECK(batch.ctx_targets[static_cast<std::size_t>(0 * tgt_len + 3)] == Vocab::kSep);
  CHECK(batch.ctx_targets[static_cast<std::size_t>(1 * tgt_len + 2)] == Vocab::kSep);
  CHECK(batch.ctx_targets[static_cast<std::size_t>(1 * tgt_len + 3)] == MaskedBatch::kIgnoreIndex);

  std::vector<std::vector<int>> empty_ctx{{30}, {}};
  CHECK_THROWS_AS(make_bottleneck_batch(passages, empty_ctx, 0.5, rng, 32), ContractError);
}

TEST_CASE("batch construction is reproducible per seed") {
  std::vector<SpanPair> pairs{{{10, 11, 12, 13, 14, 15}, {10, 11, 12}},
                              {{20, 21, 22, 23, 24, 25}, {23, 24, 25}},
                              {{30, 31, 32, 33, 34, 35}, {31, 32}}};
  Rng r1(55), r2(55);
  auto a = make_contrastive_batch(pairs, 0.4, r1, 32);
  auto b = make_contrastive_batch(pairs, 0.4, r2, 32);
  CHECK(a.passages.tokens.ids == b.passages.tokens.ids);
  CHECK(a.contexts.tokens.ids == b.contexts.tokens.ids);
  CHECK(a.passages.labels == b.passages.labels);
}

TEST_CASE("topic benchmark judges the source plus same-topic picks") {
  TopicCorpusConfig cfg;
  cfg.n_passages = 60;
  cfg.n_topics = 6;
  cfg.n_queries = 10;
  cfg.n_train_queries = 10;
  cfg.judged_per_query = 5;
  auto bench = make_topic_benchmark(cfg);
  CHECK(bench.corpus.size() == 60);
  CHECK(bench.queries.size() == 10);
  for (const auto& q : bench.queries) {
    REQUIRE(bench.qrels.judgments.count(q.id) == 1);
    const auto& judged = bench.qrels.judgments.at(q.id);
    CHECK(judged.size() == 5);
    int grade2 = 0;
    int source_topic = -1;
    for (const auto& [pid, g] : judged) {
      grade2 += g == 2;
      const int idx = std::stoi(pid.substr(1));
      if (source_topic < 0) source_topic = bench.passage_topic[static_cast<std::size_t>(idx)];
      CHECK(bench.passage_topic[static_cast<std::size_t>(idx)] == source_topic);
    }
    CHECK(grade2 == 1);
  }
  // fine-tuning triples never reuse evaluation source passages
  std::set<std::string> eval_sources;
  for (const auto& [qid, judged] : bench.qrels.judgments)
    for (const auto& [pid, g] : judged)
      if (g == 2) eval_sources.insert(pid);
  for (const auto& t : bench.triples) CHECK(eval_sources.count(t.positive_id) == 0);
}
