#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpr/core/optim.hpp"
#include "dpr/data/batching.hpp"
#include "dpr/data/corpus.hpp"
#include "dpr/data/vocab.hpp"
#include "dpr/digest.hpp"
#include "dpr/model/aux_head.hpp"
#include "dpr/model/bottleneck_decoder.hpp"
#include "dpr/model/checkpoint.hpp"
#include "dpr/model/encoder.hpp"
#include "dpr/train/losses.hpp"
#include "dpr/train/report.hpp"

namespace dpr {

using ExpansionMap = std::map<std::string, std::vector<std::string>>;

// The trainable bundle for one pre-training run: the encoder plus the
// paradigm's extra components (and a second tower when untied).
template <typename Scalar>
struct PretrainModel {
  TrainConfig cfg;
  Encoder<Scalar> encoder;
  std::optional<Encoder<Scalar>> ctx_encoder;
  std::optional<BottleneckDecoder<Scalar>> decoder;
  std::optional<AuxHead<Scalar>> aux;

  static PretrainModel init(TrainConfig cfg) {
    cfg.model.validate();
    PretrainModel m;
    m.cfg = cfg;
    Rng rng = Rng(cfg.seed).fork(0x9a7a11);
    m.encoder = Encoder<Scalar>(cfg.model, rng);
    if (cfg.model.untied_towers) m.ctx_encoder = Encoder<Scalar>(cfg.model, rng);
    if (cfg.paradigm == PretrainParadigm::bottleneck)
      m.decoder = BottleneckDecoder<Scalar>(cfg.model, rng);
    else
      m.aux = AuxHead<Scalar>(cfg.model, rng);
    return m;
  }

  const Encoder<Scalar>& context_tower() const { return ctx_encoder ? *ctx_encoder : encoder; }

  std::vector<std::pair<std::string, NdArray<Scalar>>> named_params() const {
    std::vector<std::pair<std::string, NdArray<Scalar>>> out;
    encoder.collect("encoder", out);
    if (ctx_encoder) ctx_encoder->collect("ctx_encoder", out);
    if (decoder) decoder->collect("decoder", out);
    if (aux) aux->collect("aux", out);
    return out;
  }

  std::vector<NdArray<Scalar>> params() const {
    std::vector<NdArray<Scalar>> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  Checkpoint<Scalar> to_checkpoint() const { return {cfg.to_text(), named_params()}; }

  static PretrainModel from_checkpoint(const Checkpoint<Scalar>& ckpt) {
    PretrainModel m = init(TrainConfig::parse_text(ckpt.config_text));
    auto params = m.named_params();
    assign_tensors(params, ckpt);
    return m;
  }

  static PretrainModel load(const std::string& path) {
    return from_checkpoint(Checkpoint<Scalar>::load(path));
  }

  std::string params_digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, t] : named_params()) {
      h = fnv1a(name.data(), name.size(), h);
      h = fnv1a(t.data(), static_cast<std::size_t>(t.numel()) * sizeof(Scalar), h);
    }
    return hex_digest(h);
  }
};

template <typename Scalar>
struct PretrainHooks {
  // Called at the curriculum boundary and at the end of the run.
  std::function<void(const PretrainModel<Scalar>&, long step, bool is_boundary)> on_checkpoint;
  std::function<void(const StepLog&)> on_step;
};

template <typename Scalar>
struct PretrainResult {
  PretrainModel<Scalar> model;
  TrainReport report;
};

namespace detail {

// Corpus pre-tokenized to body ids, with the bookkeeping the samplers need.
struct PretrainData {
  std::vector<std::vector<int>> bodies;             // per passage
  std::vector<std::size_t> span_eligible;           // body >= span_lo
  std::vector<std::size_t> self_eligible;           // non-empty body
  std::vector<std::pair<std::size_t, std::vector<int>>> expanded_pairs;
  long skipped = 0;

  static PretrainData build(const TrainConfig& cfg, const Corpus& corpus, const Vocab& vocab,
                            const ExpansionMap* expansions) {
    PretrainData d;
    d.bodies.reserve(corpus.size());
    for (const auto& p : corpus.passages()) d.bodies.push_back(vocab.encode_body(p.text));
    for (std::size_t i = 0; i < d.bodies.size(); ++i) {
      if (static_cast<Index>(d.bodies[i].size()) >= cfg.span_lo) d.span_eligible.push_back(i);
      if (!d.bodies[i].empty()) d.self_eligible.push_back(i);
    }
    d.skipped += static_cast<long>(corpus.size() - d.span_eligible.size());
    if (expansions) {
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto it = expansions->find(corpus.at(i).id);
        if (it == expansions->end()) continue;
        for (const auto& q : it->second) {
          std::vector<int> qb = vocab.encode_body(q);
          if (!qb.empty() && !d.bodies[i].empty()) d.expanded_pairs.emplace_back(i, std::move(qb));
        }
      }
    }
    return d;
  }

  std::size_t expanded_passage_coverage() const {
    std::vector<std::size_t> ids;
    for (const auto& [i, q] : expanded_pairs) ids.push_back(i);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids.size();
  }
};

// Draws `count` distinct values from pool with a partial Fisher-Yates.
inline std::vector<std::size_t> sample_without_replacement(const std::vector<std::size_t>& pool,
                                                           std::size_t count, Rng& rng) {
  std::vector<std::size_t> ids(pool);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform(ids.size() - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  return ids;
}

}  // namespace detail

// Runs the configured pre-training objective over the corpus. Deterministic
// per seed. With a curriculum, stage 2 continues from stage 1's parameters
// and optimizer moments; the boundary is reported and surfaced through the
// checkpoint hook.
template <typename Scalar>
PretrainResult<Scalar> run_pretraining(const TrainConfig& cfg, const Corpus& corpus,
                                       const Vocab& vocab, const ExpansionMap* expansions,
                                       const PretrainHooks<Scalar>& hooks = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig run_cfg = cfg;
  run_cfg.model.vocab_size = static_cast<int>(vocab.size());
  if (run_cfg.use_curriculum && cfg.curriculum.stage1_context == ContextSource::expanded_queries)
    throw ContractError("run_pretraining: stage-1 context cannot be expanded queries");
  if (run_cfg.paradigm == PretrainParadigm::contrastive && run_cfg.batch_size < 2)
    throw ContractError("run_pretraining: contrastive paradigm needs batch_size >= 2");

  const long boundary =
      run_cfg.use_curriculum ? run_cfg.curriculum.boundary_step(run_cfg.total_steps) : 0;
  const bool needs_expansions =
      (run_cfg.use_curriculum && boundary < run_cfg.total_steps) ||
      (!run_cfg.use_curriculum && run_cfg.single_context == ContextSource::expanded_queries);

  auto data = detail::PretrainData::build(run_cfg, corpus, vocab, expansions);
  if (needs_expansions) {
    if (!expansions)
      throw ContractError("run_pretraining: expanded-query stage configured but no expansions given");
    const auto coverage = data.expanded_passage_coverage();
    if (coverage < static_cast<std::size_t>(run_cfg.batch_size))
      throw ContractError("run_pretraining: expansions cover " + std::to_string(coverage) +
                          " passages, fewer than batch_size " +
                          std::to_string(run_cfg.batch_size));
  }

  auto model = PretrainModel<Scalar>::init(run_cfg);
  auto params = model.params();
  AdamWState<Scalar> opt;
  opt.attach(params);
  const LrSchedule sched =
      LrSchedule::warmup_cosine(run_cfg.peak_lr, run_cfg.total_steps, run_cfg.warmup_ratio);

  Rng data_rng = Rng(run_cfg.seed).fork(0xda7a);
  TrainReport report;
  report.stage_boundary = run_cfg.use_curriculum ? boundary : 0;
  report.skipped_documents = data.skipped;

  const auto tok_emb = model.encoder.token_embeddings();
  const auto max_seq = static_cast<std::size_t>(run_cfg.model.max_seq_len);
  const int tap = run_cfg.model.resolved_tap_layer();

  for (long step = 1; step <= run_cfg.total_steps; ++step) {
    const bool in_stage2 = run_cfg.use_curriculum && step > boundary;
    ContextSource ctx_source;
    if (run_cfg.use_curriculum)
      ctx_source = in_stage2 ? ContextSource::expanded_queries : run_cfg.curriculum.stage1_context;
    else
      ctx_source = run_cfg.single_context;

    double lr = lr_at_step(sched, step);
    if (in_stage2)
      lr = run_cfg.curriculum.stage2_lr > 0 ? run_cfg.curriculum.stage2_lr
                                            : lr_at_step(sched, boundary);

    zero_grads(params);
    StepLog log;
    log.step = step;
    log.lr = lr;
    double acc_enc = 0, acc_dec = 0, acc_ext = 0, acc_cl = 0, acc_total = 0;

    for (int micro = 0; micro < run_cfg.grad_accum; ++micro) {
      std::optional<NdArray<Scalar>> l_enc, l_dec, l_ext, l_cl;

      if (run_cfg.paradigm == PretrainParadigm::contrastive) {
        std::vector<SpanPair> pairs;
        pairs.reserve(static_cast<std::size_t>(run_cfg.batch_size));
        if (ctx_source == ContextSource::expanded_queries) {
          std::vector<std::size_t> pool(data.expanded_pairs.size());
          for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
          for (std::size_t pi : detail::sample_without_replacement(
                   pool, static_cast<std::size_t>(run_cfg.batch_size), data_rng)) {
            const auto& [doc, query] = data.expanded_pairs[pi];
            pairs.push_back(SpanPair{data.bodies[doc], query});
          }
        } else {
          const auto& pool = ctx_source == ContextSource::coarse_span ? data.span_eligible
                                                                      : data.self_eligible;
          if (pool.size() < static_cast<std::size_t>(run_cfg.batch_size))
            throw ContractError("run_pretraining: only " + std::to_string(pool.size()) +
                                " usable documents for batch_size " +
                                std::to_string(run_cfg.batch_size));
          const SpanMode mode =
              ctx_source == ContextSource::coarse_span ? SpanMode::cropped : SpanMode::self;
          for (std::size_t doc : detail::sample_without_replacement(
                   pool, static_cast<std::size_t>(run_cfg.batch_size), data_rng))
            pairs.push_back(sample_coarse_span(data.bodies[doc],
                                               {run_cfg.span_lo, run_cfg.span_hi}, data_rng, mode));
        }
        auto batch = make_contrastive_batch(pairs, run_cfg.mask_ratio, data_rng, max_seq);

        auto enc_p = model.encoder.encode(batch.passages.tokens);
        auto enc_c = model.context_tower().encode(batch.contexts.tokens);
        const auto& ctx_emb = model.context_tower().token_embeddings();

        // Each tower's MLM projection ties to its own embedding table; with
        // tied towers that is one table and one CE call.
        LossValue<Scalar> enc_loss;
        if (model.ctx_encoder) {
          const MlmTower<Scalar> tp[] = {{&enc_p.layer_states.back(), &batch.passages}};
          const MlmTower<Scalar> tc[] = {{&enc_c.layer_states.back(), &batch.contexts}};
          enc_loss = combine_means(loss_mlm_tied<Scalar>(tok_emb, tp),
                                   loss_mlm_tied<Scalar>(ctx_emb, tc));
        } else {
          const MlmTower<Scalar> towers[] = {{&enc_p.layer_states.back(), &batch.passages},
                                             {&enc_c.layer_states.back(), &batch.contexts}};
          enc_loss = loss_mlm_tied<Scalar>(tok_emb, towers);
        }
        l_enc = enc_loss.value;

        auto aux_p = model.aux->forward_states(enc_p.h_cls(),
                                               enc_p.layer_states[static_cast<std::size_t>(tap)],
                                               batch.passages.tokens, tap);
        auto aux_c = model.aux->forward_states(enc_c.h_cls(),
                                               enc_c.layer_states[static_cast<std::size_t>(tap)],
                                               batch.contexts.tokens, tap);
        LossValue<Scalar> ext_loss;
        if (model.ctx_encoder) {
          const MlmTower<Scalar> tp[] = {{&aux_p, &batch.passages}};
          const MlmTower<Scalar> tc[] = {{&aux_c, &batch.contexts}};
          ext_loss = combine_means(loss_mlm_tied<Scalar>(tok_emb, tp),
                                   loss_mlm_tied<Scalar>(ctx_emb, tc));
        } else {
          const MlmTower<Scalar> aux_towers[] = {{&aux_p, &batch.passages},
                                                 {&aux_c, &batch.contexts}};
          ext_loss = loss_mlm_tied<Scalar>(tok_emb, aux_towers);
        }
        l_ext = ext_loss.value;

        l_cl = loss_infonce(enc_p.h_cls(), enc_c.h_cls(), run_cfg.infonce_symmetric);
      } else {
        std::vector<std::vector<int>> passage_rows;
        std::vector<std::vector<int>> ctx_rows;
        if (ctx_source == ContextSource::expanded_queries) {
          std::vector<std::size_t> pool(data.expanded_pairs.size());
          for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
          for (std::size_t pi : detail::sample_without_replacement(
                   pool, static_cast<std::size_t>(run_cfg.batch_size), data_rng)) {
            const auto& [doc, query] = data.expanded_pairs[pi];
            passage_rows.push_back(data.bodies[doc]);
            ctx_rows.push_back(query);
          }
        } else {
          // Coarse-grained context for the bottleneck paradigm is the
          // passage itself.
          if (data.self_eligible.size() < static_cast<std::size_t>(run_cfg.batch_size))
            throw ContractError("run_pretraining: only " +
                                std::to_string(data.self_eligible.size()) +
                                " usable documents for batch_size " +
                                std::to_string(run_cfg.batch_size));
          for (std::size_t doc : detail::sample_without_replacement(
                   data.self_eligible, static_cast<std::size_t>(run_cfg.batch_size), data_rng)) {
            std::vector<int> body = data.bodies[doc];
            if (body.size() > max_seq - 2) body.resize(max_seq - 2);
            passage_rows.push_back(body);
            ctx_rows.push_back(std::move(body));
          }
        }
        auto batch =
            make_bottleneck_batch(passage_rows, ctx_rows, run_cfg.mask_ratio, data_rng, max_seq);

        auto enc = model.encoder.encode(batch.encoder_input.tokens);
        const MlmTower<Scalar> towers[] = {{&enc.layer_states.back(), &batch.encoder_input}};
        auto enc_loss = loss_mlm_tied<Scalar>(tok_emb, towers);
        l_enc = enc_loss.value;

        auto dec_logits = model.decoder->decode_logits(enc.h_cls(), batch.ctx_tokens, tok_emb);
        l_dec = loss_bottleneck_clm<Scalar>(dec_logits, batch.ctx_targets).value;
      }

      auto total = total_loss(run_cfg.paradigm, l_enc, l_dec, l_ext, l_cl);
      scale(total, Scalar(1) / Scalar(run_cfg.grad_accum)).backward();

      acc_total += static_cast<double>(total.scalar());
      acc_enc += static_cast<double>(l_enc->scalar());
      if (l_dec) acc_dec += static_cast<double>(l_dec->scalar());
      if (l_ext) acc_ext += static_cast<double>(l_ext->scalar());
      if (l_cl) acc_cl += static_cast<double>(l_cl->scalar());
    }

    adamw_step(params, opt, static_cast<Scalar>(lr));

    const double inv = 1.0 / run_cfg.grad_accum;
    log.loss_total = acc_total * inv;
    log.l_enc = acc_enc * inv;
    if (run_cfg.paradigm == PretrainParadigm::bottleneck) {
      log.l_dec = acc_dec * inv;
    } else {
      log.l_ext = acc_ext * inv;
      log.l_cl = acc_cl * inv;
    }
    report.steps.push_back(log);
    if (hooks.on_step) hooks.on_step(log);

    if (run_cfg.use_curriculum && step == boundary && boundary < run_cfg.total_steps) {
      report.stage2_entry_digest = model.params_digest();
      if (hooks.on_checkpoint) hooks.on_checkpoint(model, step, true);
    }
  }

  if (hooks.on_checkpoint) hooks.on_checkpoint(model, run_cfg.total_steps, false);
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(model), std::move(report)};
}

}  // namespace dpr
