#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dpr/cli/cli.hpp"
#include "dpr/cli/manifest.hpp"
#include "dpr/data/topic_corpus.hpp"
#include "dpr/digest.hpp"
#include "dpr/train/report.hpp"

using namespace dpr;

namespace {

namespace fs = std::filesystem;

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"dpr"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempDir {
  fs::path dir;
  TempDir() {
    dir = fs::temp_directory_path() / ("dpr_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

void write_tiny_benchmark(const TempDir& t) {
  TopicCorpusConfig tc;
  tc.n_passages = 48;
  tc.n_topics = 6;
  tc.n_queries = 8;
  tc.n_train_queries = 8;
  tc.passage_len_lo = 16;
  tc.passage_len_hi = 24;
  auto bench = make_topic_benchmark(tc);
  bench.corpus.save_tsv(t / "corpus.tsv");
  Corpus qc;
  for (const auto& q : bench.queries) qc.add(q);
  qc.save_tsv(t / "queries.tsv");
  bench.qrels.save(t / "qrels.txt");
  save_triples(t / "triples.jsonl", bench.triples);
}

}  // namespace

TEST_CASE("usage errors exit with code 1") {
  CHECK(cli({}) == 1);
  CHECK(cli({"no-such-command"}) == 1);
  CHECK(cli({"pretrain", "--no-such-flag"}) == 1);
  CHECK(cli({"build-vocab"}) == 1);  // missing required flags
  CHECK(cli({"--help"}) == 0);
}

TEST_CASE("data errors exit with code 2") {
  TempDir t;
  CHECK(cli({"build-vocab", "--corpus", t / "absent.tsv", "--out", t / "v.txt"}) == 2);
}

TEST_CASE("unreachable endpoints exit with code 3") {
  TempDir t;
  {
    std::ofstream f(t / "c.tsv");
    f << "p1\tsome text here\n";
  }
  CHECK(cli({"expand", "--corpus", t / "c.tsv", "--out", t / "x.jsonl", "--endpoint",
             "http://127.0.0.1:1/complete", "--retries", "0", "--timeout", "1"}) == 3);
}

TEST_CASE("the full pipeline runs end to end and reproduces bit-identically") {
  TempDir t;
  write_tiny_benchmark(t);

  // build-vocab
  REQUIRE(cli({"build-vocab", "--corpus", t / "corpus.tsv", "--out", t / "vocab.txt"}) == 0);
  auto manifest = RunManifest::load(t / "vocab.txt.manifest.json");
  CHECK(manifest.command == "build-vocab");
  REQUIRE(manifest.inputs.size() == 1);
  CHECK(manifest.inputs[0].second == file_digest(t / "corpus.tsv"));

  // expand (synthetic, pinned timestamp)
  auto expand_args = std::vector<std::string>{
      "expand", "--corpus", t / "corpus.tsv", "--out", t / "exp.jsonl",
      "--synthetic", "--n", "2", "--seed", "7", "--created-at", "2024-01-01T00:00:00Z"};
  REQUIRE(cli(expand_args) == 0);
  const auto exp_digest = file_digest(t / "exp.jsonl");

  // pretrain (tiny contrastive curriculum)
  auto pretrain_args = std::vector<std::string>{"pretrain",
                                                "--corpus", t / "corpus.tsv",
                                                "--vocab", t / "vocab.txt",
                                                "--out", t / "ckpt.bin",
                                                "--report", t / "report.jsonl",
                                                "--expansions", t / "exp.jsonl",
                                                "--paradigm", "contrastive",
                                                "--curriculum", "0.75",
                                                "--steps", "8",
                                                "--batch", "4",
                                                "--accum", "1",
                                                "--lr", "1e-3",
                                                "--span-lo", "4",
                                                "--span-hi", "8",
                                                "--layers", "2",
                                                "--heads", "2",
                                                "--d-model", "16",
                                                "--d-ff", "32",
                                                "--max-seq", "32",
                                                "--aux-layers", "1",
                                                "--seed", "42"};
  REQUIRE(cli(pretrain_args) == 0);
  CHECK(fs::exists(t / "ckpt.bin.stage1"));
  auto report = TrainReport::load(t / "report.jsonl");
  CHECK(report.stage_boundary == 6);
  CHECK(report.steps.size() == 8);

  // encode with shard invariance
  REQUIRE(cli({"encode", "--checkpoint", t / "ckpt.bin", "--vocab", t / "vocab.txt", "--input",
               t / "corpus.tsv", "--out", t / "emb1.bin", "--shards", "1"}) == 0);
  REQUIRE(cli({"encode", "--checkpoint", t / "ckpt.bin", "--vocab", t / "vocab.txt", "--input",
               t / "corpus.tsv", "--out", t / "emb4.bin", "--shards", "4"}) == 0);
  CHECK(file_digest(t / "emb1.bin") == file_digest(t / "emb4.bin"));

  // eval with exactly the requested metrics
  REQUIRE(cli({"eval", "--checkpoint", t / "ckpt.bin", "--vocab", t / "vocab.txt", "--corpus",
               t / "corpus.tsv", "--queries", t / "queries.tsv", "--qrels", t / "qrels.txt",
               "--metrics", "mrr@10,ndcg@10", "--run", t / "run.txt", "--report",
               t / "eval.jsonl"}) == 0);
  {
    std::ifstream f(t / "eval.jsonl");
    std::string header;
    std::getline(f, header);
    CHECK(header.find("mrr@10") != std::string::npos);
    CHECK(header.find("ndcg@10") != std::string::npos);
    CHECK(header.find("recall") == std::string::npos);
  }

  // finetune from the checkpoint
  REQUIRE(cli({"finetune", "--checkpoint", t / "ckpt.bin", "--triples", t / "triples.jsonl",
               "--corpus", t / "corpus.tsv", "--vocab", t / "vocab.txt", "--out", t / "ft.bin",
               "--steps", "4", "--batch", "4", "--lr", "1e-3", "--seed", "1"}) == 0);
  CHECK(fs::exists(t / "ft.bin"));

  // reproducibility: rerun expand + pretrain with identical manifest inputs
  fs::rename(t / "exp.jsonl", t / "exp_old.jsonl");
  fs::rename(t / "ckpt.bin", t / "ckpt_old.bin");
  fs::rename(t / "report.jsonl", t / "report_old.jsonl");
  REQUIRE(cli(expand_args) == 0);
  CHECK(file_digest(t / "exp.jsonl") == exp_digest);
  REQUIRE(cli(pretrain_args) == 0);
  CHECK(file_digest(t / "ckpt.bin") == file_digest(t / "ckpt_old.bin"));
  CHECK(file_digest(t / "report.jsonl") == file_digest(t / "report_old.jsonl"));

  fs::remove_all(t.dir);
}

TEST_CASE("finetune demands exactly one initialization source") {
  TempDir t;
  write_tiny_benchmark(t);
  REQUIRE(cli({"build-vocab", "--corpus", t / "corpus.tsv", "--out", t / "vocab.txt"}) == 0);
  CHECK(cli({"finetune", "--triples", t / "triples.jsonl", "--corpus", t / "corpus.tsv",
             "--vocab", t / "vocab.txt", "--out", t / "ft.bin"}) == 2);

  // random init trains without a checkpoint
  CHECK(cli({"finetune", "--init-random", "--triples", t / "triples.jsonl", "--corpus",
             t / "corpus.tsv", "--vocab", t / "vocab.txt", "--out", t / "ft.bin", "--steps", "2",
             "--batch", "4", "--layers", "2", "--heads", "2", "--d-model", "16", "--d-ff", "32",
             "--max-seq", "32"}) == 0);
  CHECK(fs::exists(t / "ft.bin"));
  fs::remove_all(t.dir);
}
