#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpr/data/types.hpp"

namespace dpr {

// Frequency-ranked word vocabulary with the five reserved specials.
// Body tokens are lowercased words; ties in frequency break lexicographically.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumSpecials = 5;

  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  // Builds from a corpus: lowercased, punctuation-split tokens ranked by
  // descending frequency. max_size caps the total size including specials.
  static Vocab build(const std::vector<Passage>& corpus, std::size_t max_size, int min_freq = 1);

  // One body token per line; line number = id - kNumSpecials.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  int id(const std::string& token) const;  // kUnk for out-of-vocabulary
  const std::string& token(int id) const;
  std::size_t size() const { return kNumSpecials + body_.size(); }

  // Word-splits text and maps to ids (no specials added).
  std::vector<int> encode_body(const std::string& text) const;

 private:
  std::vector<std::string> body_;
  std::unordered_map<std::string, int> index_;

  void rebuild_index();
};

// Lowercased word tokens: maximal runs of alphanumeric bytes (non-ASCII
// bytes count as word bytes), everything else separates.
std::vector<std::string> word_tokens(const std::string& text);

// [CLS] + body ids + [SEP], truncated so the result is at most max_len
// tokens and still ends with [SEP].
std::vector<int> tokenize(const std::string& text, const Vocab& vocab, std::size_t max_len);

// Joins body tokens with single spaces; specials are skipped.
std::string detokenize(std::span<const int> ids, const Vocab& vocab);

}  // namespace dpr
