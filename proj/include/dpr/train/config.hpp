#pragma once

#include <cstdint>
#include <string>

#include "dpr/model/config.hpp"

namespace dpr {

enum class PretrainParadigm { bottleneck, contrastive };

enum class ContextSource { coarse_span, passage_self, expanded_queries };

std::string to_string(PretrainParadigm p);
PretrainParadigm paradigm_from_string(const std::string& s);
std::string to_string(ContextSource c);
ContextSource context_from_string(const std::string& s);

// Two-stage plan: stage 1 trains on cheap coarse contexts under the
// warmup-cosine schedule, stage 2 switches to expanded queries under a
// constant learning rate, keeping parameters and optimizer moments.
struct CurriculumPlan {
  double stage1_fraction = 0.75;
  ContextSource stage1_context = ContextSource::coarse_span;
  // Stage-2 context is always expanded queries.
  // < 0 selects the cosine schedule's value at the stage boundary.
  double stage2_lr = -1.0;

  long boundary_step(long total_steps) const;
};

struct TrainConfig {
  PretrainParadigm paradigm = PretrainParadigm::contrastive;
  long total_steps = 2000;
  Index batch_size = 32;
  int grad_accum = 4;
  double peak_lr = 3e-4;
  double warmup_ratio = 0.1;
  double mask_ratio = 0.30;
  std::uint64_t seed = 42;

  bool use_curriculum = false;
  CurriculumPlan curriculum;
  ContextSource single_context = ContextSource::coarse_span;

  Index span_lo = 32;
  Index span_hi = 96;
  bool infonce_symmetric = false;
  std::string precision = "f32";

  EncoderConfig model;

  // Full echo as documented key = value text; parse() accepts the same form.
  std::string to_text() const;
  static TrainConfig parse_text(const std::string& text);
  static TrainConfig parse_file(const std::string& path);
  void save(const std::string& path) const;

  // Stage-1 context defaults per paradigm when left unset: random cropped
  // spans for contrastive pre-training, the passage itself for bottleneck.
  ContextSource default_stage1_context() const {
    return paradigm == PretrainParadigm::bottleneck ? ContextSource::passage_self
                                                    : ContextSource::coarse_span;
  }

  // The published large-scale settings, kept as a named preset for
  // documentation; desk-scale runs override most of it.
  static TrainConfig full_scale_profile(PretrainParadigm p);
};

struct FinetuneConfig {
  long total_steps = 300;
  Index batch_size = 8;
  int grad_accum = 1;
  double lr = 1e-4;
  int negatives_per_query = 4;
  std::uint64_t seed = 42;
  std::string precision = "f32";

  std::string to_text() const;
  static FinetuneConfig parse_text(const std::string& text);

  // Published fine-tuning settings (lr 2e-5, batch 8, 15 negatives).
  static FinetuneConfig full_scale_profile();
};

}  // namespace dpr
