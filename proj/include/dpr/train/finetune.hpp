#pragma once

#include <string>
#include <vector>

#include "dpr/train/pretrain.hpp"

namespace dpr {

// One labeled retrieval example: a query, its positive passage and any
// number of explicit negatives. In-batch passages are always added as
// further negatives during optimization.
struct FinetuneTriple {
  std::string query;
  std::string positive_id;
  std::vector<std::string> negative_ids;
};

// Line-delimited {"query", "positive_id", "negative_ids": [...]} records.
std::vector<FinetuneTriple> load_triples(const std::string& path);
void save_triples(const std::string& path, const std::vector<FinetuneTriple>& triples);

// Contrastive fine-tuning of the retriever: for each query the softmax over
// its positive against the union of its explicit negatives and every other
// in-batch passage. Mutates the model in place and reports per-step losses.
template <typename Scalar>
TrainReport run_finetune(PretrainModel<Scalar>& model, const std::vector<FinetuneTriple>& triples,
                         const Corpus& corpus, const Vocab& vocab, const FinetuneConfig& fcfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (triples.empty()) throw DataError("run_finetune: no triples");
  for (const auto& t : triples) {
    if (t.positive_id.empty()) throw DataError("run_finetune: query '" + t.query + "' has no positive");
    if (!corpus.contains(t.positive_id))
      throw DataError("run_finetune: positive id '" + t.positive_id + "' not in corpus");
    for (const auto& nid : t.negative_ids)
      if (!corpus.contains(nid))
        throw DataError("run_finetune: negative id '" + nid + "' not in corpus");
  }
  if (static_cast<Index>(triples.size()) < fcfg.batch_size)
    throw ContractError("run_finetune: " + std::to_string(triples.size()) +
                        " triples for batch_size " + std::to_string(fcfg.batch_size));

  const auto max_seq = static_cast<std::size_t>(model.cfg.model.max_seq_len);
  auto params = model.params();
  AdamWState<Scalar> opt;
  opt.attach(params);
  Rng rng = Rng(fcfg.seed).fork(0xf17e);

  std::vector<std::size_t> pool(triples.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;

  TrainReport report;
  for (long step = 1; step <= fcfg.total_steps; ++step) {
    zero_grads(params);
    double acc_loss = 0;
    for (int micro = 0; micro < fcfg.grad_accum; ++micro) {
      auto picks = detail::sample_without_replacement(
          pool, static_cast<std::size_t>(fcfg.batch_size), rng);

      std::vector<std::vector<int>> query_rows;
      std::vector<std::vector<int>> passage_rows;
      std::vector<int> positive_at;
      for (std::size_t ti : picks) {
        const auto& t = triples[ti];
        query_rows.push_back(tokenize(t.query, vocab, max_seq));
        positive_at.push_back(static_cast<int>(passage_rows.size()));
        passage_rows.push_back(tokenize(corpus.find(t.positive_id)->text, vocab, max_seq));
        const int take = std::min<int>(fcfg.negatives_per_query,
                                       static_cast<int>(t.negative_ids.size()));
        for (int j = 0; j < take; ++j)
          passage_rows.push_back(tokenize(corpus.find(t.negative_ids[static_cast<std::size_t>(j)])->text,
                                          vocab, max_seq));
      }

      auto q_res = model.context_tower().encode(pad_rows(query_rows));
      auto p_res = model.encoder.encode(pad_rows(passage_rows));
      auto scores = matmul_nt(q_res.h_cls(), p_res.h_cls());
      auto loss = cross_entropy_logits<Scalar>(scores, positive_at, -1).loss;
      scale(loss, Scalar(1) / Scalar(fcfg.grad_accum)).backward();
      acc_loss += static_cast<double>(loss.scalar());
    }
    adamw_step(params, opt, static_cast<Scalar>(fcfg.lr));

    StepLog log;
    log.step = step;
    log.lr = fcfg.lr;
    log.loss_total = acc_loss / fcfg.grad_accum;
    report.steps.push_back(log);
  }
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace dpr
