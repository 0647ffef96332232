#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "dpr/data/topic_corpus.hpp"
#include "dpr/expand/parse.hpp"
#include "dpr/expand/store.hpp"

// httplib must follow Eigen: it leaks macros that collide with Eigen's
// template internals when included first.
#include <httplib.h>
#include <json.hpp>

using namespace dpr;

namespace {

std::string tmp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dpr_exp_" + name)).string();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0, at = 0;
  while ((at = hay.find(needle, at)) != std::string::npos) {
    ++n;
    at += needle.size();
  }
  return n;
}

// Scripted transport: plays back queued responses and records request bodies.
class FakeTransport : public CompletionTransport {
 public:
  std::vector<TransportResponse> script;
  std::vector<std::string> bodies;
  std::size_t cursor = 0;

  TransportResponse post(const std::string&, const std::string& body, const std::string&,
                         double) override {
    bodies.push_back(body);
    if (cursor >= script.size()) return {false, 0, "", "script exhausted"};
    return script[cursor++];
  }
};

EndpointConfig fast_endpoint() {
  EndpointConfig ep;
  ep.url = "http://fake.invalid/complete";
  ep.retry_budget = 2;
  ep.backoff_base_s = 1e-4;
  return ep;
}

}  // namespace

TEST_CASE("zero-shot prompt embeds the passage verbatim exactly once") {
  auto tpl = PromptTemplate::zero_shot_default();
  Passage p{"p1", "THE_UNIQUE_PASSAGE_SENTINEL_93"};
  auto rendered = render_prompt(tpl, p, 3);
  CHECK(count_occurrences(rendered, p.text) == 1);
  CHECK(rendered.find("3") != std::string::npos);  // query count substituted
  CHECK_THROWS_AS(render_prompt(tpl, p, 0), ContractError);
}

TEST_CASE("few-shot prompt puts every exemplar before the target passage") {
  auto tpl = PromptTemplate::few_shot_default();
  Passage p{"p1", "TARGET_PASSAGE_MARKER"};
  auto rendered = render_prompt(tpl, p, 2);
  std::size_t last_exemplar = 0;
  for (const auto& ex : tpl.exemplars) {
    const auto at = rendered.find(ex.passage);
    REQUIRE(at != std::string::npos);
    last_exemplar = std::max(last_exemplar, at);
  }
  CHECK(rendered.find(p.text) > last_exemplar);

  PromptTemplate bad;
  bad.kind = PromptTemplate::Kind::few_shot;
  bad.instruction = "x";
  CHECK_THROWS_AS(render_prompt(bad, p, 1), DataError);
}

TEST_CASE("prompt rendering is deterministic and injection-proof") {
  auto tpl = PromptTemplate::zero_shot_default();
  Passage hostile{"p1", "text with {n} and Passage: fragments inside"};
  auto a = render_prompt(tpl, hostile, 3);
  auto b = render_prompt(tpl, hostile, 3);
  CHECK(a == b);
  // the {n} inside the passage is not expanded
  CHECK(a.find("with {n} and") != std::string::npos);
}

TEST_CASE("prompt templates round-trip through their file form") {
  auto tpl = PromptTemplate::few_shot_default();
  const auto path = tmp_file("tpl.json");
  tpl.save(path);
  auto loaded = PromptTemplate::load(path);
  CHECK(loaded.instruction == tpl.instruction);
  REQUIRE(loaded.exemplars.size() == tpl.exemplars.size());
  CHECK(loaded.exemplars[0].queries == tpl.exemplars[0].queries);
}

TEST_CASE("synthetic generation is deterministic and lexically grounded") {
  TopicCorpusConfig tc;
  tc.n_passages = 1000;
  tc.n_topics = 20;
  tc.n_queries = 2;
  tc.n_train_queries = 2;
  auto bench = make_topic_benchmark(tc);
  SyntheticExpander expander(bench.corpus);

  const auto& p = bench.corpus.at(17);
  auto a = expander.generate(p, 3, 7);
  auto b = expander.generate(p, 3, 7);
  CHECK(a.queries == b.queries);
  CHECK(a.queries.size() == 3);

  auto other = expander.generate(p, 3, 8);
  CHECK(a.queries != other.queries);

  // every query over the whole corpus shares a non-stopword with its passage
  for (std::size_t i = 0; i < bench.corpus.size(); ++i) {
    auto gen = expander.generate(bench.corpus.at(i), 3, 7);
    std::set<std::string> passage_words;
    for (auto& w : word_tokens(bench.corpus.at(i).text)) passage_words.insert(w);
    for (const auto& q : gen.queries) {
      bool overlap = false;
      for (auto& w : word_tokens(q))
        overlap = overlap || (!is_stopword(w) && passage_words.count(w) > 0);
      CHECK(overlap);
    }
  }
}

TEST_CASE("synthetic generation falls back on content-free passages") {
  Corpus tiny;
  tiny.add({"p1", "the of and in on"});
  tiny.add({"p2", "काव्य" });
  SyntheticExpander expander(tiny);
  auto gen = expander.generate(tiny.at(0), 3, 1);
  CHECK(gen.queries.size() == 1);
  CHECK(gen.queries[0] == "the of and in on");
  CHECK(gen.shortfall);
}

TEST_CASE("parse_completion strips enumerations and dedups case-insensitively") {
  auto qs = parse_completion("1. what is a?\n2. where is b?");
  CHECK(qs == std::vector<std::string>{"what is a?", "where is b?"});

  auto bullets = parse_completion("- alpha\n* beta\n\xe2\x80\xa2 gamma\n3) delta\nQ: epsilon");
  CHECK(bullets == std::vector<std::string>{"alpha", "beta", "gamma", "delta", "epsilon"});

  auto deduped = parse_completion("Q: x\nq: X");
  CHECK(deduped == std::vector<std::string>{"x"});

  CHECK_THROWS_AS(parse_completion("\n\n"), EmptyExpansionError);
  CHECK_THROWS_AS(parse_completion("1.\n- \n"), EmptyExpansionError);
}

TEST_CASE("a hundred expansion records survive the round trip unchanged") {
  Corpus corpus;
  std::vector<ExpandedQueries> records;
  GenerationParams params;
  Rng rng(71);
  for (int i = 0; i < 100; ++i) {
    const std::string id = "p" + std::to_string(i);
    corpus.add({id, "text body " + std::to_string(i)});
    std::vector<std::string> queries;
    const int n = 1 + static_cast<int>(rng.uniform(4));
    for (int q = 0; q < n; ++q)
      queries.push_back("query " + std::to_string(i) + "_" + std::to_string(q));
    records.push_back({id, queries, i % 2 ? "synthetic" : "remote:m", params,
                       "2024-02-02T00:00:00Z"});
  }
  const auto path = tmp_file("hundred.jsonl");
  persist_expansions(records, path);
  auto loaded = load_expansions(path, corpus);
  REQUIRE(loaded.records.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(loaded.records[i].passage_id == records[i].passage_id);
    CHECK(loaded.records[i].queries == records[i].queries);
    CHECK(loaded.records[i].generator == records[i].generator);
    CHECK(loaded.records[i].created_at == records[i].created_at);
  }
}

TEST_CASE("prompt rendering and completion parsing stay pure on arbitrary bytes") {
  Rng rng(72);
  auto tpl = PromptTemplate::zero_shot_default();
  for (int trial = 0; trial < 200; ++trial) {
    std::string blob;
    const long len = rng.uniform_range(1, 60);
    for (long i = 0; i < len; ++i) blob.push_back(static_cast<char>(rng.uniform(256)));
    Passage p{"pX", blob};
    CHECK(render_prompt(tpl, p, 2) == render_prompt(tpl, p, 2));
    try {
      auto a = parse_completion(blob);
      auto b = parse_completion(blob);
      CHECK(a == b);
      for (const auto& q : a) CHECK_FALSE(q.empty());
    } catch (const EmptyExpansionError&) {
      // acceptable outcome for hostile bytes
    }
  }
}

TEST_CASE("expansion records round-trip and orphans are reported") {
  Corpus corpus;
  corpus.add({"p1", "alpha beta"});
  corpus.add({"p2", "gamma delta"});

  std::vector<ExpandedQueries> records;
  GenerationParams params;
  records.push_back({"p1", {"what is alpha", "alpha beta"}, "synthetic", params, "2024-01-01T00:00:00Z"});
  records.push_back({"p2", {"gamma?"}, "remote:test", params, "2024-01-01T00:00:00Z"});
  const auto path = tmp_file("expansions.jsonl");
  persist_expansions(records, path);

  auto loaded = load_expansions(path, corpus);
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].queries == records[0].queries);
  CHECK(loaded.records[1].generator == "remote:test");
  CHECK(loaded.by_passage.at("p1").size() == 2);
  CHECK(loaded.orphans.empty());

  // unknown passage id: skipped with a report
  records.push_back({"ghost", {"query"}, "synthetic", params, ""});
  persist_expansions(records, path);
  auto with_orphan = load_expansions(path, corpus);
  CHECK(with_orphan.records.size() == 2);
  REQUIRE(with_orphan.orphans.size() == 1);
  CHECK(with_orphan.orphans[0] == "ghost");

  // corrupt line: line-numbered error
  {
    std::ofstream f(path, std::ios::app);
    f << "{not json\n";
  }
  CHECK_THROWS_WITH_AS(load_expansions(path, corpus), doctest::Contains(":4"), DataError);

  // empty file: empty map, no error
  const auto empty_path = tmp_file("empty.jsonl");
  std::ofstream(empty_path).close();
  auto empty = load_expansions(empty_path, corpus);
  CHECK(empty.records.empty());
  CHECK(empty.by_passage.empty());
}

TEST_CASE("remote generation forwards the sampling parameters") {
  auto fake = std::make_unique<FakeTransport>();
  fake->script.push_back({true, 200, R"({"text": "1. q"})", ""});
  auto* fake_ptr = fake.get();
  RemoteGenerator gen(fast_endpoint(), std::move(fake));

  GenerationParams params;
  auto raw = gen.generate("PROMPT", params);
  CHECK(raw == "1. q");
  REQUIRE(fake_ptr->bodies.size() == 1);
  auto body = nlohmann::json::parse(fake_ptr->bodies[0]);
  CHECK(body["prompt"] == "PROMPT");
  CHECK(body["top_p"] == doctest::Approx(0.95));
  CHECK(body["top_k"] == 50);
  CHECK(body["temperature"] == doctest::Approx(0.7));
  CHECK(body.contains("max_tokens"));
}

TEST_CASE("remote generation retries then fails with the endpoint status") {
  auto fake = std::make_unique<FakeTransport>();
  for (int i = 0; i < 3; ++i) fake->script.push_back({true, 500, "oops", ""});
  auto* fake_ptr = fake.get();
  RemoteGenerator gen(fast_endpoint(), std::move(fake));

  GenerationParams params;
  try {
    gen.generate("PROMPT", params);
    FAIL("expected EndpointError");
  } catch (const EndpointError& e) {
    CHECK(e.status() == 500);
  }
  CHECK(fake_ptr->bodies.size() == 3);  // first attempt + 2 retries
  CHECK(gen.requests_issued() == 3);
}

TEST_CASE("remote generation recovers when a retry succeeds") {
  auto fake = std::make_unique<FakeTransport>();
  fake->script.push_back({false, 0, "", "connection refused"});
  fake->script.push_back({true, 200, R"({"text": "ok"})", ""});
  RemoteGenerator gen(fast_endpoint(), std::move(fake));
  GenerationParams params;
  CHECK(gen.generate("p", params) == "ok");
}

TEST_CASE("malformed endpoint responses are parse errors, not retries") {
  auto fake = std::make_unique<FakeTransport>();
  fake->script.push_back({true, 200, "not json at all", ""});
  auto* fake_ptr = fake.get();
  RemoteGenerator gen(fast_endpoint(), std::move(fake));
  GenerationParams params;
  CHECK_THROWS_AS(gen.generate("p", params), ParseError);
  CHECK(fake_ptr->bodies.size() == 1);

  auto fake2 = std::make_unique<FakeTransport>();
  fake2->script.push_back({true, 200, R"({"no_text": 1})", ""});
  RemoteGenerator gen2(fast_endpoint(), std::move(fake2));
  CHECK_THROWS_AS(gen2.generate("p", params), ParseError);
}

TEST_CASE("remote fan-out merges by passage and skips empty completions") {
  Corpus corpus;
  corpus.add({"p1", "alpha beta gamma"});
  corpus.add({"p2", "delta epsilon zeta"});
  corpus.add({"p3", "eta theta iota"});

  // Scripted per-call results; the echo server answers by passage content.
  class EchoTransport : public CompletionTransport {
   public:
    TransportResponse post(const std::string&, const std::string& body, const std::string&,
                           double) override {
      auto j = nlohmann::json::parse(body);
      const std::string prompt = j["prompt"];
      nlohmann::json out;
      if (prompt.find("delta") != std::string::npos) {
        out["text"] = "\n\n";  // parses to nothing -> passage skipped
      } else if (prompt.find("alpha") != std::string::npos) {
        out["text"] = "1. about alpha\n2. about beta";
      } else {
        out["text"] = "1. about eta";
      }
      return {true, 200, out.dump(), ""};
    }
  };

  RemoteGenerator gen(fast_endpoint(), std::make_unique<EchoTransport>());
  GenerationParams params;
  ExpandOptions options;
  options.workers = 3;
  options.created_at = "2024-01-01T00:00:00Z";
  long skipped = 0;
  auto records = expand_corpus_remote(corpus, PromptTemplate::zero_shot_default(), gen, params,
                                      options, &skipped);
  REQUIRE(records.size() == 2);
  CHECK(skipped == 1);
  CHECK(records[0].passage_id == "p1");
  CHECK(records[0].queries.size() == 2);
  CHECK(records[1].passage_id == "p3");
}

TEST_CASE("loopback HTTP endpoint round-trips through the real transport") {
  httplib::Server server;
  std::atomic<int> calls{0};
  server.Post("/complete", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    auto j = nlohmann::json::parse(req.body);
    nlohmann::json out;
    out["text"] = "1. echoed for: " + j["prompt"].get<std::string>().substr(0, 10);
    res.set_content(out.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  EndpointConfig ep;
  ep.url = "http://127.0.0.1:" + std::to_string(port) + "/complete";
  ep.retry_budget = 1;
  ep.backoff_base_s = 1e-4;
  RemoteGenerator gen(ep);
  GenerationParams params;
  auto raw = gen.generate("HELLO WORLD PROMPT", params);
  CHECK(raw.find("echoed for: HELLO WORL") != std::string::npos);
  CHECK(calls.load() == 1);

  server.stop();
  server_thread.join();
}
