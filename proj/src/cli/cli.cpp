#include "dpr/cli/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "dpr/cli/manifest.hpp"
#include "dpr/data/topic_corpus.hpp"
#include "dpr/error.hpp"
#include "dpr/expand/store.hpp"
#include "dpr/retrieval/evaluate.hpp"
#include "dpr/train/finetune.hpp"
#include "dpr/train/pretrain.hpp"

namespace dpr {

namespace {

namespace fs = std::filesystem;

RunManifest base_manifest(const std::string& command, int argc, const char* const* argv) {
  RunManifest m;
  m.command = command;
  for (int i = 0; i < argc; ++i) m.argv.emplace_back(argv[i]);
  m.version = dpr_version_string();
  m.created_at = utc_timestamp_now();
  return m;
}

void require_vocab_match(const Vocab& vocab, const EncoderConfig& cfg) {
  if (static_cast<int>(vocab.size()) != cfg.vocab_size)
    throw DataError("vocab of " + std::to_string(vocab.size()) +
                    " entries does not match checkpoint vocab_size " +
                    std::to_string(cfg.vocab_size));
}

// ---------------------------------------------------------------------------
// build-vocab
// ---------------------------------------------------------------------------

struct BuildVocabArgs {
  std::string corpus_path, out_path;
  long max_size = 30000;
  long min_freq = 1;
};

int cmd_build_vocab(const BuildVocabArgs& a, int argc, const char* const* argv) {
  auto corpus = Corpus::load(a.corpus_path);
  auto vocab = Vocab::build(corpus.passages(), static_cast<std::size_t>(a.max_size),
                            static_cast<int>(a.min_freq));
  vocab.save(a.out_path);
  std::cout << "vocab: " << vocab.size() << " entries (incl. " << Vocab::kNumSpecials
            << " specials) -> " << a.out_path << "\n";

  auto m = base_manifest("build-vocab", argc, argv);
  m.resolved_config = "max_size = " + std::to_string(a.max_size) +
                      "\nmin_freq = " + std::to_string(a.min_freq) + "\n";
  m.add_input(a.corpus_path);
  m.outputs = {a.out_path};
  m.save(a.out_path + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// expand
// ---------------------------------------------------------------------------

struct ExpandArgs {
  std::string corpus_path, out_path;
  std::string template_spec = "zero-shot";
  bool synthetic = false;
  std::string endpoint_url;
  long n = 3;
  std::uint64_t seed = 42;
  long workers = 1;
  double rate_limit = 0.0;
  double timeout_s = 30.0;
  long retries = 2;
  std::string auth_env;
  std::string model_name = "remote";
  std::string created_at;
  GenerationParams gen;
};

int cmd_expand(const ExpandArgs& a, int argc, const char* const* argv) {
  if (a.synthetic == !a.endpoint_url.empty())
    throw ContractError("expand: choose exactly one of --synthetic or --endpoint");
  auto corpus = Corpus::load(a.corpus_path);

  ExpandOptions options;
  options.n_queries = static_cast<int>(a.n);
  options.seed = a.seed;
  options.workers = static_cast<int>(a.workers);
  options.created_at = a.created_at;

  std::vector<ExpandedQueries> records;
  long skipped = 0;
  if (a.synthetic) {
    records = expand_corpus_synthetic(corpus, options);
  } else {
    PromptTemplate tpl;
    if (a.template_spec == "zero-shot")
      tpl = PromptTemplate::zero_shot_default();
    else if (a.template_spec == "few-shot")
      tpl = PromptTemplate::few_shot_default();
    else
      tpl = PromptTemplate::load(a.template_spec);

    EndpointConfig ep;
    ep.url = a.endpoint_url;
    ep.auth_token_env = a.auth_env;
    ep.timeout_s = a.timeout_s;
    ep.retry_budget = static_cast<int>(a.retries);
    ep.rate_limit_rps = a.rate_limit;
    ep.model_name = a.model_name;
    RemoteGenerator gen(ep);
    GenerationParams params = a.gen;
    params.n_queries_requested = static_cast<int>(a.n);
    records = expand_corpus_remote(corpus, tpl, gen, params, options, &skipped);
  }
  persist_expansions(records, a.out_path);
  std::cout << "expanded " << records.size() << " passages -> " << a.out_path;
  if (skipped > 0) std::cout << " (" << skipped << " skipped: empty completions)";
  std::cout << "\n";

  auto m = base_manifest("expand", argc, argv);
  m.seed = a.seed;
  m.resolved_config = "generator = " + std::string(a.synthetic ? "synthetic" : "remote") +
                      "\nn = " + std::to_string(a.n) +
                      "\ncreated_at = " + (a.created_at.empty() ? "(now)" : a.created_at) + "\n";
  m.add_input(a.corpus_path);
  m.outputs = {a.out_path};
  m.save(a.out_path + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

struct PretrainArgs {
  std::string corpus_path, vocab_path, out_path, report_path, expansions_path, config_path;
  TrainConfig cfg;  // resolved
};

template <typename Scalar>
int cmd_pretrain_impl(const PretrainArgs& a, int argc, const char* const* argv) {
  auto corpus = Corpus::load(a.corpus_path);
  auto vocab = Vocab::load(a.vocab_path);

  ExpansionMap expansions;
  bool have_expansions = false;
  if (!a.expansions_path.empty()) {
    auto loaded = load_expansions(a.expansions_path, corpus);
    if (!loaded.orphans.empty())
      std::cerr << "expansions: " << loaded.orphans.size()
                << " records reference unknown passages and were skipped\n";
    expansions = std::move(loaded.by_passage);
    have_expansions = true;
  }

  PretrainHooks<Scalar> hooks;
  hooks.on_checkpoint = [&](const PretrainModel<Scalar>& model, long step, bool boundary) {
    const std::string path = boundary ? a.out_path + ".stage1" : a.out_path;
    model.to_checkpoint().save(path);
    std::cout << (boundary ? "stage boundary at step " : "checkpoint at step ") << step << " -> "
              << path << "\n";
  };
  long next_log = 1;
  hooks.on_step = [&](const StepLog& s) {
    if (s.step == next_log || s.step == a.cfg.total_steps) {
      std::cout << "step " << s.step << " lr " << s.lr << " loss " << s.loss_total << "\n";
      next_log = s.step < 100 ? s.step * 2 : s.step + 100;
    }
  };

  auto result = run_pretraining<Scalar>(a.cfg, corpus, vocab,
                                        have_expansions ? &expansions : nullptr, hooks);
  if (!a.report_path.empty()) result.report.save(a.report_path);
  std::cout << "pre-training done in " << result.report.wall_clock_s << "s, final loss "
            << (result.report.steps.empty() ? 0.0 : result.report.steps.back().loss_total) << "\n";

  auto m = base_manifest("pretrain", argc, argv);
  m.seed = a.cfg.seed;
  m.resolved_config = result.model.cfg.to_text();
  m.add_input(a.corpus_path);
  m.add_input(a.vocab_path);
  if (!a.expansions_path.empty()) m.add_input(a.expansions_path);
  m.outputs = {a.out_path};
  if (!a.report_path.empty()) m.outputs.push_back(a.report_path);
  m.save(a.out_path + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------

struct FinetuneArgs {
  std::string checkpoint_path, triples_path, corpus_path, vocab_path, out_path, report_path;
  bool init_random = false;
  TrainConfig scratch_cfg;  // model dims when starting from random init
  FinetuneConfig cfg;
};

template <typename Scalar>
int cmd_finetune_impl(const FinetuneArgs& a, int argc, const char* const* argv) {
  auto corpus = Corpus::load(a.corpus_path);
  auto vocab = Vocab::load(a.vocab_path);
  auto triples = load_triples(a.triples_path);

  PretrainModel<Scalar> model;
  if (a.init_random) {
    TrainConfig cfg = a.scratch_cfg;
    cfg.model.vocab_size = static_cast<int>(vocab.size());
    model = PretrainModel<Scalar>::init(cfg);
  } else {
    model = PretrainModel<Scalar>::load(a.checkpoint_path);
    require_vocab_match(vocab, model.cfg.model);
  }

  auto report = run_finetune(model, triples, corpus, vocab, a.cfg);
  model.to_checkpoint().save(a.out_path);
  if (!a.report_path.empty()) report.save(a.report_path);
  std::cout << "fine-tuning done in " << report.wall_clock_s << "s, final loss "
            << (report.steps.empty() ? 0.0 : report.steps.back().loss_total) << " -> " << a.out_path
            << "\n";

  auto m = base_manifest("finetune", argc, argv);
  m.seed = a.cfg.seed;
  m.resolved_config = a.cfg.to_text();
  if (!a.init_random) m.add_input(a.checkpoint_path);
  m.add_input(a.triples_path);
  m.add_input(a.corpus_path);
  m.add_input(a.vocab_path);
  m.outputs = {a.out_path};
  m.save(a.out_path + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::string checkpoint_path, vocab_path, input_path, out_path;
  bool queries = false;
  long shards = 1;
};

template <typename Scalar>
int cmd_encode_impl(const EncodeArgs& a, int argc, const char* const* argv) {
  auto vocab = Vocab::load(a.vocab_path);
  auto model = PretrainModel<Scalar>::load(a.checkpoint_path);
  require_vocab_match(vocab, model.cfg.model);
  auto texts = Corpus::load(a.input_path);

  const auto& tower = a.queries ? model.context_tower() : model.encoder;
  auto emb = encode_texts(tower, texts.passages(), vocab, static_cast<int>(a.shards));
  emb.save(a.out_path);
  std::cout << "encoded " << emb.count() << " texts (d=" << emb.dim() << ") -> " << a.out_path
            << "\n";

  auto m = base_manifest("encode", argc, argv);
  m.resolved_config = std::string("tower = ") + (a.queries ? "query" : "passage") +
                      "\nshards = " + std::to_string(a.shards) + "\n";
  m.add_input(a.checkpoint_path);
  m.add_input(a.vocab_path);
  m.add_input(a.input_path);
  m.outputs = {a.out_path};
  m.save(a.out_path + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint_path, vocab_path, corpus_path, queries_path, qrels_path;
  std::string metrics_csv = "mrr@10,recall@50,ndcg@10";
  long k = 0;
  std::string run_path, report_path;
  long shards = 1;
};

template <typename Scalar>
int cmd_eval_impl(const EvalArgs& a, int argc, const char* const* argv) {
  auto vocab = Vocab::load(a.vocab_path);
  auto model = PretrainModel<Scalar>::load(a.checkpoint_path);
  require_vocab_match(vocab, model.cfg.model);
  auto corpus = Corpus::load(a.corpus_path);
  auto queries = Corpus::load(a.queries_path);
  auto qrels = Qrels::load(a.qrels_path);
  auto metrics = MetricSpec::parse_list(a.metrics_csv);

  auto outcome = evaluate(model, corpus, queries.passages(), vocab, qrels, metrics,
                          static_cast<int>(a.k), static_cast<int>(a.shards));
  outcome.report.checkpoint_id = file_digest(a.checkpoint_path);
  std::cout << outcome.report.table();
  if (!a.run_path.empty()) outcome.run.save_trec(a.run_path, "dpr");
  if (!a.report_path.empty()) outcome.report.save(a.report_path);

  auto m = base_manifest("eval", argc, argv);
  m.resolved_config = "metrics = " + a.metrics_csv + "\nk = " + std::to_string(a.k) + "\n";
  m.add_input(a.checkpoint_path);
  m.add_input(a.vocab_path);
  m.add_input(a.corpus_path);
  m.add_input(a.queries_path);
  m.add_input(a.qrels_path);
  if (!a.run_path.empty()) m.outputs.push_back(a.run_path);
  if (!a.report_path.empty()) m.outputs.push_back(a.report_path);
  const std::string manifest_target = !a.report_path.empty() ? a.report_path
                                      : !a.run_path.empty()  ? a.run_path
                                                             : a.qrels_path + ".eval";
  m.save(manifest_target + ".manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// demo
// ---------------------------------------------------------------------------

struct DemoArgs {
  std::string out_dir = "demo-out";
  long steps = 600;
  std::uint64_t seed = 42;
  long passages = 2000;
  long topics = 50;
  long queries = 200;
  long batch = 16;
  bool with_curriculum = false;
};

int cmd_demo(const DemoArgs& a, int argc, const char* const* argv) {
  fs::create_directories(a.out_dir);
  const std::string dir = a.out_dir + "/";

  TopicCorpusConfig tc;
  tc.n_passages = static_cast<int>(a.passages);
  tc.n_topics = static_cast<int>(a.topics);
  tc.n_queries = static_cast<int>(a.queries);
  tc.seed = a.seed;
  auto bench = make_topic_benchmark(tc);
  bench.corpus.save_tsv(dir + "corpus.tsv");
  {
    Corpus qc;
    for (const auto& q : bench.queries) qc.add(q);
    qc.save_tsv(dir + "queries.tsv");
  }
  bench.qrels.save(dir + "qrels.txt");
  save_triples(dir + "triples.jsonl", bench.triples);
  std::cout << "benchmark: " << bench.corpus.size() << " passages, " << bench.queries.size()
            << " held-out queries, " << tc.n_topics << " topics -> " << a.out_dir << "\n";

  auto vocab = Vocab::build(bench.corpus.passages(), 30000, 1);
  vocab.save(dir + "vocab.txt");

  ExpandOptions xopt;
  xopt.n_queries = 3;
  xopt.seed = a.seed;
  auto expansions = expand_corpus_synthetic(bench.corpus, xopt);
  persist_expansions(expansions, dir + "expansions.jsonl");
  auto loaded = load_expansions(dir + "expansions.jsonl", bench.corpus);

  TrainConfig base;
  base.paradigm = PretrainParadigm::contrastive;
  base.total_steps = a.steps;
  base.batch_size = static_cast<Index>(a.batch);
  base.grad_accum = 1;
  base.peak_lr = 2e-3;
  base.mask_ratio = 0.30;
  base.seed = a.seed;
  base.span_lo = 12;
  base.span_hi = 28;
  base.model.n_layers = 2;
  base.model.n_heads = 2;
  base.model.d_model = 32;
  base.model.d_ff = 128;
  base.model.max_seq_len = 48;
  base.model.n_aux_layers = 1;

  const std::vector<MetricSpec> metrics = MetricSpec::parse_list("mrr@10,recall@10,ndcg@10");
  struct Row {
    std::string name;
    MetricReport report;
  };
  std::vector<Row> rows;

  auto run_one = [&](const std::string& name, const TrainConfig& cfg, bool use_expansions) {
    std::cout << "== pre-training: " << name << " ==\n";
    auto result = run_pretraining<float>(cfg, bench.corpus, vocab,
                                         use_expansions ? &loaded.by_passage : nullptr);
    result.model.to_checkpoint().save(dir + "ckpt-" + name + ".bin");
    auto outcome = evaluate(result.model, bench.corpus, bench.queries, vocab, bench.qrels, metrics);
    rows.push_back({name, outcome.report});
    std::cout << "  " << result.report.wall_clock_s << "s, zero-shot mrr@10 "
              << outcome.report.means.at("mrr@10") << "\n";
  };

  TrainConfig baseline = base;
  baseline.single_context = ContextSource::coarse_span;
  run_one("baseline", baseline, false);

  TrainConfig expanded = base;
  expanded.single_context = ContextSource::expanded_queries;
  run_one("expanded", expanded, true);

  if (a.with_curriculum) {
    TrainConfig curriculum = base;
    curriculum.use_curriculum = true;
    curriculum.curriculum.stage1_fraction = 0.75;
    curriculum.curriculum.stage1_context = ContextSource::coarse_span;
    run_one("curriculum", curriculum, true);
  }

  std::cout << "\n" << std::left << std::setw(14) << "run";
  for (const auto& name : rows.front().report.metric_names)
    std::cout << std::right << std::setw(12) << name;
  std::cout << "\n";
  for (const auto& row : rows) {
    std::cout << std::left << std::setw(14) << row.name;
    for (const auto& name : row.report.metric_names)
      std::cout << std::right << std::setw(12) << std::fixed << std::setprecision(4)
                << row.report.means.at(name);
    std::cout << "\n";
  }

  auto m = base_manifest("demo", argc, argv);
  m.seed = a.seed;
  m.resolved_config = base.to_text();
  m.outputs = {a.out_dir};
  m.save(dir + "demo.manifest.json");
  return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

template <typename Args, typename Fn>
int dispatch_precision(const std::string& precision, const Args& a, Fn&& fn) {
  if (precision == "f64") return fn(double{}, a);
  if (precision == "f32") return fn(float{}, a);
  throw ContractError("precision must be f32 or f64, got '" + precision + "'");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"dense-retriever pre-training with document-expansion queries"};
  app.require_subcommand(1);

  BuildVocabArgs bv;
  auto* c_bv = app.add_subcommand("build-vocab", "build a word vocabulary from a corpus");
  c_bv->add_option("--corpus", bv.corpus_path, "corpus file (tsv or jsonl)")->required();
  c_bv->add_option("--out", bv.out_path, "output vocab file")->required();
  c_bv->add_option("--max-size", bv.max_size, "vocabulary capacity incl. specials");
  c_bv->add_option("--min-freq", bv.min_freq, "minimum token frequency");

  ExpandArgs ex;
  auto* c_ex = app.add_subcommand("expand", "generate pseudo-queries per passage");
  c_ex->add_option("--corpus", ex.corpus_path)->required();
  c_ex->add_option("--out", ex.out_path)->required();
  c_ex->add_option("--template", ex.template_spec, "zero-shot, few-shot or a template file");
  c_ex->add_flag("--synthetic", ex.synthetic, "use the offline tf-idf generator");
  c_ex->add_option("--endpoint", ex.endpoint_url, "completion endpoint url");
  c_ex->add_option("--n", ex.n, "queries per passage");
  c_ex->add_option("--seed", ex.seed);
  c_ex->add_option("--workers", ex.workers);
  c_ex->add_option("--rate-limit", ex.rate_limit, "requests per second (0 = unlimited)");
  c_ex->add_option("--timeout", ex.timeout_s, "endpoint timeout seconds");
  c_ex->add_option("--retries", ex.retries, "retry budget");
  c_ex->add_option("--auth-env", ex.auth_env, "env var holding the bearer token");
  c_ex->add_option("--model-name", ex.model_name);
  c_ex->add_option("--created-at", ex.created_at, "pin the record timestamp (for replays)");
  c_ex->add_option("--top-p", ex.gen.top_p);
  c_ex->add_option("--top-k", ex.gen.top_k);
  c_ex->add_option("--temperature", ex.gen.temperature);
  c_ex->add_option("--max-tokens", ex.gen.max_new_tokens);

  PretrainArgs pt;
  std::string pt_paradigm = "contrastive", pt_context, pt_precision = "f32", pt_profile = "desk";
  double pt_curriculum = -1;
  auto* c_pt = app.add_subcommand("pretrain", "run a pre-training objective");
  c_pt->add_option("--corpus", pt.corpus_path)->required();
  c_pt->add_option("--vocab", pt.vocab_path)->required();
  c_pt->add_option("--out", pt.out_path, "checkpoint output")->required();
  c_pt->add_option("--report", pt.report_path, "per-step loss report (jsonl)");
  c_pt->add_option("--expansions", pt.expansions_path, "expansion records for query contexts");
  c_pt->add_option("--config", pt.config_path, "train config file (cli flags override)");
  auto* o_profile = c_pt->add_option("--profile", pt_profile, "desk or full base profile");
  auto* o_paradigm = c_pt->add_option("--paradigm", pt_paradigm, "contrastive or bottleneck");
  auto* o_curr = c_pt->add_option("--curriculum", pt_curriculum,
                                  "two-stage plan: fraction of steps in stage 1");
  auto* o_ctx = c_pt->add_option("--context", pt_context, "single-stage context: span, self, expanded");
  auto* o_steps = c_pt->add_option("--steps", pt.cfg.total_steps);
  auto* o_batch = c_pt->add_option("--batch", pt.cfg.batch_size);
  auto* o_accum = c_pt->add_option("--accum", pt.cfg.grad_accum);
  auto* o_lr = c_pt->add_option("--lr", pt.cfg.peak_lr);
  auto* o_warmup = c_pt->add_option("--warmup", pt.cfg.warmup_ratio);
  auto* o_mask = c_pt->add_option("--mask-ratio", pt.cfg.mask_ratio);
  auto* o_seed = c_pt->add_option("--seed", pt.cfg.seed);
  auto* o_s2lr = c_pt->add_option("--stage2-lr", pt.cfg.curriculum.stage2_lr);
  auto* o_spanlo = c_pt->add_option("--span-lo", pt.cfg.span_lo);
  auto* o_spanhi = c_pt->add_option("--span-hi", pt.cfg.span_hi);
  auto* o_sym = c_pt->add_flag("--infonce-symmetric", pt.cfg.infonce_symmetric);
  auto* o_prec = c_pt->add_option("--precision", pt_precision, "f32 or f64");
  auto* o_layers = c_pt->add_option("--layers", pt.cfg.model.n_layers);
  auto* o_heads = c_pt->add_option("--heads", pt.cfg.model.n_heads);
  auto* o_dmodel = c_pt->add_option("--d-model", pt.cfg.model.d_model);
  auto* o_dff = c_pt->add_option("--d-ff", pt.cfg.model.d_ff);
  auto* o_maxseq = c_pt->add_option("--max-seq", pt.cfg.model.max_seq_len);
  auto* o_tap = c_pt->add_option("--aux-tap", pt.cfg.model.aux_tap_layer);
  auto* o_auxl = c_pt->add_option("--aux-layers", pt.cfg.model.n_aux_layers);
  auto* o_untied = c_pt->add_flag("--untied", pt.cfg.model.untied_towers);

  FinetuneArgs ft;
  std::string ft_precision = "f32";
  auto* c_ft = app.add_subcommand("finetune", "contrastive fine-tuning on triples");
  c_ft->add_option("--checkpoint", ft.checkpoint_path, "starting checkpoint");
  c_ft->add_flag("--init-random", ft.init_random, "start from random initialization");
  c_ft->add_option("--triples", ft.triples_path)->required();
  c_ft->add_option("--corpus", ft.corpus_path)->required();
  c_ft->add_option("--vocab", ft.vocab_path)->required();
  c_ft->add_option("--out", ft.out_path)->required();
  c_ft->add_option("--report", ft.report_path);
  c_ft->add_option("--steps", ft.cfg.total_steps);
  c_ft->add_option("--batch", ft.cfg.batch_size);
  c_ft->add_option("--lr", ft.cfg.lr);
  c_ft->add_option("--negatives", ft.cfg.negatives_per_query);
  c_ft->add_option("--seed", ft.cfg.seed);
  c_ft->add_option("--precision", ft_precision);
  c_ft->add_option("--layers", ft.scratch_cfg.model.n_layers, "model depth for --init-random");
  c_ft->add_option("--heads", ft.scratch_cfg.model.n_heads);
  c_ft->add_option("--d-model", ft.scratch_cfg.model.d_model);
  c_ft->add_option("--d-ff", ft.scratch_cfg.model.d_ff);
  c_ft->add_option("--max-seq", ft.scratch_cfg.model.max_seq_len);

  EncodeArgs en;
  auto* c_en = app.add_subcommand("encode", "encode texts into sentence vectors");
  c_en->add_option("--checkpoint", en.checkpoint_path)->required();
  c_en->add_option("--vocab", en.vocab_path)->required();
  c_en->add_option("--input", en.input_path, "texts to encode (corpus format)")->required();
  c_en->add_option("--out", en.out_path)->required();
  c_en->add_flag("--queries", en.queries, "use the query tower");
  c_en->add_option("--shards", en.shards, "parallel shards (output is shard-invariant)");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "zero-shot or fine-tuned retrieval evaluation");
  c_ev->add_option("--checkpoint", ev.checkpoint_path)->required();
  c_ev->add_option("--vocab", ev.vocab_path)->required();
  c_ev->add_option("--corpus", ev.corpus_path)->required();
  c_ev->add_option("--queries", ev.queries_path)->required();
  c_ev->add_option("--qrels", ev.qrels_path)->required();
  c_ev->add_option("--metrics", ev.metrics_csv, "comma list: mrr@K, recall@K, ndcg@K");
  c_ev->add_option("--k", ev.k, "search depth (0 = largest metric cutoff)");
  c_ev->add_option("--run", ev.run_path, "write a TREC run file");
  c_ev->add_option("--report", ev.report_path, "write the metric report (jsonl)");
  c_ev->add_option("--shards", ev.shards);

  DemoArgs dm;
  auto* c_dm = app.add_subcommand(
      "demo", "generate the synthetic topic benchmark and compare baseline vs expanded");
  c_dm->add_option("--out", dm.out_dir);
  c_dm->add_option("--steps", dm.steps);
  c_dm->add_option("--seed", dm.seed);
  c_dm->add_option("--passages", dm.passages);
  c_dm->add_option("--topics", dm.topics);
  c_dm->add_option("--queries", dm.queries);
  c_dm->add_option("--batch", dm.batch);
  c_dm->add_flag("--curriculum", dm.with_curriculum, "add a 75/25 curriculum run");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_bv->parsed()) return cmd_build_vocab(bv, argc, argv);
    if (c_ex->parsed()) return cmd_expand(ex, argc, argv);
    if (c_pt->parsed()) {
      // Precedence: explicit flag > config file > profile.
      TrainConfig cfg;
      if (o_profile->count() && pt_profile == "full")
        cfg = TrainConfig::full_scale_profile(paradigm_from_string(pt_paradigm));
      if (!pt.config_path.empty()) cfg = TrainConfig::parse_file(pt.config_path);
      if (o_paradigm->count()) cfg.paradigm = paradigm_from_string(pt_paradigm);
      if (o_curr->count()) {
        cfg.use_curriculum = true;
        cfg.curriculum.stage1_fraction = pt_curriculum;
        cfg.curriculum.stage1_context = cfg.default_stage1_context();
      }
      if (o_ctx->count()) {
        cfg.use_curriculum = false;
        cfg.single_context = context_from_string(pt_context);
      } else if (!o_curr->count() && !pt.config_path.empty()) {
        // keep config file's schedule
      } else if (!o_curr->count()) {
        cfg.single_context = cfg.default_stage1_context();
      }
      if (o_steps->count()) cfg.total_steps = pt.cfg.total_steps;
      if (o_batch->count()) cfg.batch_size = pt.cfg.batch_size;
      if (o_accum->count()) cfg.grad_accum = pt.cfg.grad_accum;
      if (o_lr->count()) cfg.peak_lr = pt.cfg.peak_lr;
      if (o_warmup->count()) cfg.warmup_ratio = pt.cfg.warmup_ratio;
      if (o_mask->count()) cfg.mask_ratio = pt.cfg.mask_ratio;
      if (o_seed->count()) cfg.seed = pt.cfg.seed;
      if (o_s2lr->count()) cfg.curriculum.stage2_lr = pt.cfg.curriculum.stage2_lr;
      if (o_spanlo->count()) cfg.span_lo = pt.cfg.span_lo;
      if (o_spanhi->count()) cfg.span_hi = pt.cfg.span_hi;
      if (o_sym->count()) cfg.infonce_symmetric = pt.cfg.infonce_symmetric;
      if (o_prec->count()) cfg.precision = pt_precision;
      if (o_layers->count()) cfg.model.n_layers = pt.cfg.model.n_layers;
      if (o_heads->count()) cfg.model.n_heads = pt.cfg.model.n_heads;
      if (o_dmodel->count()) cfg.model.d_model = pt.cfg.model.d_model;
      if (o_dff->count()) cfg.model.d_ff = pt.cfg.model.d_ff;
      if (o_maxseq->count()) cfg.model.max_seq_len = pt.cfg.model.max_seq_len;
      if (o_tap->count()) cfg.model.aux_tap_layer = pt.cfg.model.aux_tap_layer;
      if (o_auxl->count()) cfg.model.n_aux_layers = pt.cfg.model.n_aux_layers;
      if (o_untied->count()) cfg.model.untied_towers = pt.cfg.model.untied_towers;
      pt.cfg = cfg;
      return dispatch_precision(cfg.precision, pt, [&](auto tag, const PretrainArgs& a) {
        return cmd_pretrain_impl<decltype(tag)>(a, argc, argv);
      });
    }
    if (c_ft->parsed()) {
      if (ft.init_random == !ft.checkpoint_path.empty())
        throw ContractError("finetune: choose exactly one of --checkpoint or --init-random");
      ft.cfg.precision = ft_precision;
      std::string precision = ft_precision;
      if (!ft.init_random)
        precision = Checkpoint<float>::peek_scalar_width(ft.checkpoint_path) == 8 ? "f64" : "f32";
      return dispatch_precision(precision, ft, [&](auto tag, const FinetuneArgs& a) {
        return cmd_finetune_impl<decltype(tag)>(a, argc, argv);
      });
    }
    if (c_en->parsed()) {
      const std::string precision =
          Checkpoint<float>::peek_scalar_width(en.checkpoint_path) == 8 ? "f64" : "f32";
      return dispatch_precision(precision, en, [&](auto tag, const EncodeArgs& a) {
        return cmd_encode_impl<decltype(tag)>(a, argc, argv);
      });
    }
    if (c_ev->parsed()) {
      const std::string precision =
          Checkpoint<float>::peek_scalar_width(ev.checkpoint_path) == 8 ? "f64" : "f32";
      return dispatch_precision(precision, ev, [&](auto tag, const EvalArgs& a) {
        return cmd_eval_impl<decltype(tag)>(a, argc, argv);
      });
    }
    if (c_dm->parsed()) return cmd_demo(dm, argc, argv);
    std::cerr << app.help();
    return 1;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dpr
