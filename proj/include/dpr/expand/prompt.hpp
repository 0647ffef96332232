#pragma once

#include <string>
#include <vector>

#include "dpr/data/types.hpp"

namespace dpr {

struct PromptExemplar {
  std::string passage;
  std::vector<std::string> queries;
};

// Query-generation prompt. Rendering is structural: the passage is spliced
// in as-is exactly once and never re-scanned, so passage text containing
// placeholder-looking fragments cannot inject template syntax. The
// instruction may use {n} for the requested query count.
struct PromptTemplate {
  enum class Kind { zero_shot, few_shot };
  Kind kind = Kind::zero_shot;
  std::string instruction;
  std::vector<PromptExemplar> exemplars;

  void validate() const;

  static PromptTemplate zero_shot_default();
  static PromptTemplate few_shot_default();

  // JSON file: {"kind", "instruction", "exemplars": [{"passage", "queries"}]}
  static PromptTemplate load(const std::string& path);
  void save(const std::string& path) const;
};

std::string render_prompt(const PromptTemplate& tpl, const Passage& passage, int n);

}  // namespace dpr
