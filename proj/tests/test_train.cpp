#include <doctest.h>

#include <cmath>

#include "dpr/data/topic_corpus.hpp"
#include "dpr/expand/store.hpp"
#include "support/gradcheck.hpp"
#include "support/tiny_models.hpp"

using namespace dpr;
using dpr::test::tiny_train_config;

namespace {

MaskedBatch masked_fixture(Rng& rng, Index batch = 2, double ratio = 0.4, int vocab = 40) {
  auto rows = dpr::test::tiny_rows(rng, batch, 5, 9, vocab);
  return make_masked_batch(rows, ratio, rng);
}

}  // namespace

TEST_CASE("loss_mlm: uniform logits give ln(vocab)") {
  Rng rng(51);
  auto batch = masked_fixture(rng, 2, 0.4, 8 + Vocab::kNumSpecials);
  const Index rows = batch.tokens.batch * batch.tokens.seq_len;
  auto logits = NdArray<double>::zeros({rows, 8});
  // targets must be addressable in an 8-wide vocabulary: remap labels
  MaskedBatch remapped = batch;
  for (auto& l : remapped.labels)
    if (l != MaskedBatch::kIgnoreIndex) l = l % 8;
  auto loss = loss_mlm(logits, remapped);
  CHECK_FALSE(loss.empty());
  CHECK(loss.value.scalar() == doctest::Approx(std::log(8.0)).epsilon(1e-9));
}

TEST_CASE("loss_mlm ignores logits at non-masked positions") {
  Rng rng(52);
  auto batch = masked_fixture(rng);
  const Index rows = batch.tokens.batch * batch.tokens.seq_len;
  Rng lrng(520);
  auto logits = NdArray<double>::randn({rows, 40}, lrng, 1.0);
  const double before = loss_mlm(logits, batch).value.scalar();

  for (Index r = 0; r < rows; ++r) {
    if (batch.labels[static_cast<std::size_t>(r)] == MaskedBatch::kIgnoreIndex)
      logits.value().row(r).array() += 3.21;  // perturb only unmasked rows
  }
  const double after = loss_mlm(logits, batch).value.scalar();
  CHECK(before == doctest::Approx(after).epsilon(1e-12));
}

TEST_CASE("loss_mlm equals the gathered tied-projection route") {
  Rng rng(53);
  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 7);
  auto model = PretrainModel<double>::init(cfg);
  auto batch = masked_fixture(rng);

  auto res = model.encoder.encode(batch.tokens, /*want_mlm_logits=*/true);
  const double full_route = loss_mlm(res.mlm_logits, batch).value.scalar();
  const double fast_route = dpr::test::build_mlm_loss(model, batch).scalar();
  CHECK(full_route == doctest::Approx(fast_route).epsilon(1e-9));
}

TEST_CASE("loss_mlm flags the all-ignored case as empty") {
  MaskedBatch batch;
  batch.tokens = pad_rows({{Vocab::kCls, 7, Vocab::kSep}});
  batch.labels.assign(3, MaskedBatch::kIgnoreIndex);
  batch.mask_positions.resize(1);
  batch.empty_mask = true;
  auto logits = NdArray<double>::zeros({3, 40});
  auto loss = loss_mlm(logits, batch);
  CHECK(loss.empty());
  CHECK(loss.value.scalar() == 0.0);
}

TEST_CASE("loss_bottleneck_clm: single-token context is one prediction from the pooled state") {
  Rng rng(54);
  auto cfg = tiny_train_config(PretrainParadigm::bottleneck, 9);
  auto model = PretrainModel<double>::init(cfg);

  auto batch = make_bottleneck_batch({{10, 11, 12}}, {{25}}, 0.3, rng, 16);
  CHECK(batch.ctx_tokens.seq_len == 1);
  auto res = model.encoder.encode(batch.encoder_input.tokens);
  auto logits = model.decoder->decode_logits(res.h_cls(), batch.ctx_tokens,
                                             model.encoder.token_embeddings());
  CHECK(logits.rows() == 2);  // predict x_1 from h_cls, then [SEP] from x_1
  auto loss = loss_bottleneck_clm<double>(logits, batch.ctx_targets);
  CHECK(loss.contributing == 2);

  // direct evaluation
  auto ce = cross_entropy_logits<double>(logits, batch.ctx_targets, MaskedBatch::kIgnoreIndex);
  CHECK(loss.value.scalar() == doctest::Approx(ce.loss.scalar()).epsilon(1e-12));

  std::vector<int> empty;
  CHECK_THROWS_AS(loss_bottleneck_clm<double>(logits, empty), ContractError);
}

TEST_CASE("loss_bottleneck_clm agrees with the masked-CE machinery on a constructed case") {
  // With identical logits and targets, next-token CE and masked CE are the
  // same mean; build both from one logits matrix.
  Rng rng(55);
  auto logits = NdArray<double>::randn({6, 40}, rng, 1.0);
  std::vector<int> targets{7, 9, MaskedBatch::kIgnoreIndex, 11, Vocab::kSep,
                           MaskedBatch::kIgnoreIndex};
  auto clm = loss_bottleneck_clm<double>(logits, targets);

  MaskedBatch as_masked;
  as_masked.tokens.batch = 1;
  as_masked.tokens.seq_len = 6;
  as_masked.tokens.ids.assign(6, Vocab::kMask);
  as_masked.tokens.attention_mask.assign(6, 1);
  as_masked.labels = targets;
  auto mlm = loss_mlm(logits, as_masked);
  CHECK(clm.value.scalar() == doctest::Approx(mlm.value.scalar()).epsilon(1e-12));
  CHECK(clm.contributing == mlm.contributing);
}

TEST_CASE("loss_ext: gradient reaches the encoder through pooled and tapped paths") {
  Rng rng(56);
  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 13);
  auto model = PretrainModel<double>::init(cfg);
  auto batch = masked_fixture(rng);

  auto params = model.params();
  zero_grads(params);
  auto loss = dpr::test::build_aux_loss(model, batch);
  loss.backward();

  // The tap is layer 1 of 2: final-layer parameters influence the head only
  // through the pooled state, so a nonzero gradient there proves the pooled
  // path; tap-layer parameters prove the tapped path.
  auto named = model.named_params();
  double final_layer_grad = 0.0, tap_layer_grad = 0.0;
  for (auto& [name, t] : named) {
    if (!t.has_grad()) continue;
    const double g = t.grad().cwiseAbs().maxCoeff();
    if (name.find("encoder.layer1.") != std::string::npos) final_layer_grad = std::max(final_layer_grad, g);
    if (name.find("encoder.layer0.") != std::string::npos) tap_layer_grad = std::max(tap_layer_grad, g);
  }
  CHECK(final_layer_grad > 0.0);
  CHECK(tap_layer_grad > 0.0);
}

TEST_CASE("loss_infonce oracle values") {
  // orthonormal case: positives score 1, cross scores 0
  auto v_p = NdArray<double>::from_values({2, 2}, {1, 0, 0, 1});
  auto v_c = NdArray<double>::from_values({2, 2}, {1, 0, 0, 1});
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  CHECK(loss_infonce(v_p, v_c).scalar() == doctest::Approx(expected).epsilon(1e-6));

  // all-equal scores: ln B
  auto same = NdArray<double>::from_values({3, 2}, {1, 1, 1, 1, 1, 1});
  CHECK(loss_infonce(same, same).scalar() == doctest::Approx(std::log(3.0)).epsilon(1e-9));

  // batch of one has no negatives
  auto single = NdArray<double>::from_values({1, 2}, {1, 0});
  CHECK_THROWS_AS(loss_infonce(single, single), ContractError);
}

TEST_CASE("loss_infonce is shift invariant and nonnegative") {
  Rng rng(57);
  auto v_p = NdArray<double>::randn({4, 8}, rng, 1.0);
  auto v_c = NdArray<double>::randn({4, 8}, rng, 1.0);
  const double base = loss_infonce(v_p, v_c).scalar();
  CHECK(base >= 0.0);

  // adding a constant to every score: realized by appending a shared
  // coordinate via a rank-1 trick is overkill here; instead verify on raw
  // score matrices through the same CE path.
  auto scores = matmul_nt(v_p, v_c);
  std::vector<int> diag{0, 1, 2, 3};
  auto shifted = NdArray<double>::zeros({4, 4});
  shifted.value() = scores.value().array() + 5.5;
  const double a = cross_entropy_logits<double>(scores, diag, -1).loss.scalar();
  const double b = cross_entropy_logits<double>(shifted, diag, -1).loss.scalar();
  CHECK(a == doctest::Approx(b).epsilon(1e-9));
}

TEST_CASE("loss_infonce is invariant under simultaneous row permutation") {
  Rng rng(58);
  auto v_p = NdArray<double>::randn({5, 6}, rng, 1.0);
  auto v_c = NdArray<double>::randn({5, 6}, rng, 1.0);
  const double base = loss_infonce(v_p, v_c).scalar();

  std::vector<Index> perm{3, 0, 4, 1, 2};
  auto pp = rows_gather(v_p, perm);
  auto pc = rows_gather(v_c, perm);
  CHECK(loss_infonce(pp, pc).scalar() == doctest::Approx(base).epsilon(1e-6));
}

TEST_CASE("total_loss sums components exactly as stated") {
  auto a = NdArray<double>::from_values({1}, {0.5});
  auto b = NdArray<double>::from_values({1}, {0.7});
  auto c = NdArray<double>::from_values({1}, {0.3});

  auto bottleneck = total_loss<double>(PretrainParadigm::bottleneck, a, b, {}, {});
  CHECK(bottleneck.scalar() == 0.5 + 0.7);  // bit-exact
  auto contrastive = total_loss<double>(PretrainParadigm::contrastive, a, {}, b, c);
  CHECK(contrastive.scalar() == (0.5 + 0.7) + 0.3);

  CHECK_THROWS_AS(total_loss<double>(PretrainParadigm::bottleneck, a, {}, {}, {}), ContractError);
  CHECK_THROWS_AS(total_loss<double>(PretrainParadigm::contrastive, a, b, {}, {}), ContractError);
}

TEST_CASE("gradient of the total equals the sum of component gradients") {
  Rng rng(59);
  auto x = NdArray<double>::randn({2, 4}, rng, 1.0, true);
  auto mk_a = [&] { return sum(mul(x, x)); };
  auto mk_b = [&] { return sum(gelu(x)); };

  x.zero_grad();
  add(mk_a(), mk_b()).backward();
  Mat<double> total_grad = x.grad();

  x.zero_grad();
  mk_a().backward();
  Mat<double> ga = x.grad();
  x.zero_grad();
  mk_b().backward();
  Mat<double> gb = x.grad();
  CHECK(((total_grad - (ga + gb)).cwiseAbs().maxCoeff()) < 1e-12);
}

TEST_CASE("every pre-training loss matches finite differences on a tiny model") {
  Rng check_rng(60);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng data_rng(600 + seed);
    // masked-LM loss
    {
      auto model = PretrainModel<double>::init(
          tiny_train_config(PretrainParadigm::contrastive, seed));
      auto batch = masked_fixture(data_rng);
      const double err = dpr::test::max_grad_rel_err(
          [&] { return dpr::test::build_mlm_loss(model, batch); }, model.params(), check_rng, 1e-4,
          3);
      CHECK(err < 1e-3);
    }
    // decoder CLM loss
    {
      auto model =
          PretrainModel<double>::init(tiny_train_config(PretrainParadigm::bottleneck, seed));
      auto rows = dpr::test::tiny_rows(data_rng, 2, 4, 7, 40);
      std::vector<std::vector<int>> bodies;
      for (auto& r : rows) bodies.emplace_back(r.begin() + 1, r.end() - 1);
      auto batch = make_bottleneck_batch(bodies, bodies, 0.3, data_rng, 16);
      const double err = dpr::test::max_grad_rel_err(
          [&] { return dpr::test::build_clm_loss(model, batch); }, model.params(), check_rng, 1e-4,
          3);
      CHECK(err < 1e-3);
    }
    // auxiliary-head loss
    {
      auto model = PretrainModel<double>::init(
          tiny_train_config(PretrainParadigm::contrastive, seed + 50));
      auto batch = masked_fixture(data_rng);
      const double err = dpr::test::max_grad_rel_err(
          [&] { return dpr::test::build_aux_loss(model, batch); }, model.params(), check_rng, 1e-4,
          3);
      CHECK(err < 1e-3);
    }
    // in-batch contrastive loss
    {
      auto model = PretrainModel<double>::init(
          tiny_train_config(PretrainParadigm::contrastive, seed + 100));
      std::vector<SpanPair> pairs;
      for (int i = 0; i < 3; ++i) {
        auto rows = dpr::test::tiny_rows(data_rng, 1, 6, 10, 40);
        std::vector<int> body(rows[0].begin() + 1, rows[0].end() - 1);
        pairs.push_back(sample_coarse_span(body, {3, 5}, data_rng));
      }
      auto batch = make_contrastive_batch(pairs, 0.3, data_rng, 16);
      const double err = dpr::test::max_grad_rel_err(
          [&] { return dpr::test::build_infonce_loss(model, batch); }, model.params(), check_rng,
          1e-4, 3);
      CHECK(err < 1e-3);
    }
    // fine-tuning loss
    {
      auto model = PretrainModel<double>::init(
          tiny_train_config(PretrainParadigm::contrastive, seed + 150));
      auto queries = pad_rows(dpr::test::tiny_rows(data_rng, 2, 3, 5, 40));
      auto passages = pad_rows(dpr::test::tiny_rows(data_rng, 4, 5, 8, 40));
      std::vector<int> positive_at{0, 2};
      const double err = dpr::test::max_grad_rel_err(
          [&] { return dpr::test::build_finetune_loss(model, queries, passages, positive_at); },
          model.params(), check_rng, 1e-4, 3);
      CHECK(err < 1e-3);
    }
  }
}

TEST_CASE("curriculum plan arithmetic and stage-2 learning rate") {
  CurriculumPlan plan;
  plan.stage1_fraction = 0.75;
  CHECK(plan.boundary_step(100) == 75);
  CHECK(plan.boundary_step(2000) == 1500);
  plan.stage1_fraction = 1.0;
  CHECK(plan.boundary_step(100) == 100);
}

TEST_CASE("pre-training runs both stages with the documented schedule") {
  TopicCorpusConfig tc;
  tc.n_passages = 40;
  tc.n_topics = 4;
  tc.n_queries = 4;
  tc.n_train_queries = 4;
  auto bench = make_topic_benchmark(tc);
  auto vocab = Vocab::build(bench.corpus.passages(), 4000);

  ExpandOptions xopt;
  xopt.n_queries = 2;
  auto expansions = expand_corpus_synthetic(bench.corpus, xopt);
  ExpansionMap by_passage;
  for (auto& r : expansions) by_passage[r.passage_id] = r.queries;

  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 42, 0);
  cfg.total_steps = 16;
  cfg.batch_size = 4;
  cfg.grad_accum = 1;
  cfg.peak_lr = 1e-3;
  cfg.span_lo = 4;
  cfg.span_hi = 8;
  cfg.use_curriculum = true;
  cfg.curriculum.stage1_fraction = 0.75;

  std::string boundary_digest;
  PretrainHooks<float> hooks;
  hooks.on_checkpoint = [&](const PretrainModel<float>& m, long step, bool is_boundary) {
    if (is_boundary) {
      CHECK(step == 12);
      boundary_digest = m.params_digest();
    }
  };
  auto result = run_pretraining<float>(cfg, bench.corpus, vocab, &by_passage, hooks);

  CHECK(result.report.stage_boundary == 12);
  CHECK(result.report.stage2_entry_digest == boundary_digest);
  CHECK(result.report.steps.size() == 16);
  // stage 2 learning rate is pinned to the cosine value at the boundary
  const auto sched = LrSchedule::warmup_cosine(cfg.peak_lr, 16, cfg.warmup_ratio);
  const double stage2_lr = lr_at_step(sched, 12);
  for (std::size_t s = 12; s < 16; ++s)
    CHECK(result.report.steps[s].lr == doctest::Approx(stage2_lr).epsilon(1e-12));
  for (const auto& s : result.report.steps) {
    CHECK(std::isfinite(s.loss_total));
    CHECK(std::isfinite(s.l_enc));
    CHECK(std::isfinite(s.l_ext));
    CHECK(std::isfinite(s.l_cl));
  }
}

TEST_CASE("single-stage and degenerate-fraction plans never touch expansions") {
  TopicCorpusConfig tc;
  tc.n_passages = 24;
  tc.n_topics = 4;
  tc.n_queries = 2;
  tc.n_train_queries = 2;
  auto bench = make_topic_benchmark(tc);
  auto vocab = Vocab::build(bench.corpus.passages(), 4000);

  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 42, 0);
  cfg.total_steps = 4;
  cfg.batch_size = 4;
  cfg.span_lo = 4;
  cfg.span_hi = 8;
  cfg.use_curriculum = true;
  cfg.curriculum.stage1_fraction = 1.0;  // stage 2 never runs
  auto result = run_pretraining<float>(cfg, bench.corpus, vocab, nullptr);
  CHECK(result.report.steps.size() == 4);
  CHECK(result.report.stage2_entry_digest.empty());

  // expanded single-stage without expansions is a configuration error
  cfg.use_curriculum = false;
  cfg.single_context = ContextSource::expanded_queries;
  CHECK_THROWS_AS(run_pretraining<float>(cfg, bench.corpus, vocab, nullptr), ContractError);

  // ... as is coverage below the batch size
  ExpansionMap sparse;
  sparse[bench.corpus.at(0).id] = {"one query"};
  CHECK_THROWS_WITH_AS(run_pretraining<float>(cfg, bench.corpus, vocab, &sparse),
                       doctest::Contains("cover"), ContractError);
}

TEST_CASE("pre-training is deterministic per seed") {
  TopicCorpusConfig tc;
  tc.n_passages = 24;
  tc.n_topics = 4;
  tc.n_queries = 2;
  tc.n_train_queries = 2;
  auto bench = make_topic_benchmark(tc);
  auto vocab = Vocab::build(bench.corpus.passages(), 4000);

  auto cfg = tiny_train_config(PretrainParadigm::bottleneck, 77, 0);
  cfg.total_steps = 6;
  cfg.batch_size = 4;

  auto a = run_pretraining<float>(cfg, bench.corpus, vocab, nullptr);
  auto b = run_pretraining<float>(cfg, bench.corpus, vocab, nullptr);
  CHECK(a.model.params_digest() == b.model.params_digest());
  for (std::size_t i = 0; i < a.report.steps.size(); ++i)
    CHECK(a.report.steps[i].loss_total == b.report.steps[i].loss_total);
}

TEST_CASE("training smoke: loss falls over 200 steps on a small corpus") {
  TopicCorpusConfig tc;
  tc.n_passages = 256;
  tc.n_topics = 16;
  tc.n_queries = 4;
  tc.n_train_queries = 4;
  tc.passage_len_lo = 20;
  tc.passage_len_hi = 30;
  auto bench = make_topic_benchmark(tc);
  auto vocab = Vocab::build(bench.corpus.passages(), 4000);

  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 42, 0);
  cfg.total_steps = 200;
  cfg.batch_size = 8;
  cfg.peak_lr = 2e-3;
  cfg.span_lo = 6;
  cfg.span_hi = 14;
  cfg.model.max_seq_len = 32;

  auto result = run_pretraining<float>(cfg, bench.corpus, vocab, nullptr);
  const double early = result.report.steps[9].loss_total;
  const double late = result.report.steps.back().loss_total;
  CHECK(late < early);
}

TEST_CASE("fine-tuning reduces its loss and reproduces per seed") {
  TopicCorpusConfig tc;
  tc.n_passages = 128;
  tc.n_topics = 8;
  tc.n_queries = 4;
  tc.n_train_queries = 64;
  auto bench = make_topic_benchmark(tc);
  auto vocab = Vocab::build(bench.corpus.passages(), 4000);

  auto cfg = tiny_train_config(PretrainParadigm::contrastive, 42, 0);
  cfg.model.vocab_size = static_cast<int>(vocab.size());
  cfg.model.max_seq_len = 32;
  auto model = PretrainModel<float>::init(cfg);

  FinetuneConfig fcfg;
  fcfg.total_steps = 60;
  fcfg.batch_size = 8;
  fcfg.lr = 1e-3;
  fcfg.negatives_per_query = 2;
  auto report = run_finetune(model, bench.triples, bench.corpus, vocab, fcfg);

  auto smoothed = [&](std::size_t from, std::size_t to) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += report.steps[i].loss_total;
    return s / static_cast<double>(to - from);
  };
  CHECK(smoothed(50, 60) < smoothed(0, 10));

  // same seed, fresh model: identical trajectory
  auto model2 = PretrainModel<float>::init(cfg);
  auto report2 = run_finetune(model2, bench.triples, bench.corpus, vocab, fcfg);
  CHECK(model.params_digest() == model2.params_digest());
  CHECK(report2.steps.back().loss_total == report.steps.back().loss_total);

  // a query with no positive is a data error
  std::vector<FinetuneTriple> bad{{"query text", "", {}}};
  CHECK_THROWS_AS(run_finetune(model, bad, bench.corpus, vocab, fcfg), DataError);
}
