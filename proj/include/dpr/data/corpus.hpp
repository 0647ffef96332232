#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dpr/data/types.hpp"

namespace dpr {

// In-memory passage collection with unique ids.
class Corpus {
 public:
  // Reads either tab-separated `id<TAB>text` lines or line-delimited JSON
  // records {"id": ..., "text": ...}; the format is detected from the first
  // non-empty line. Malformed lines raise line-numbered errors.
  static Corpus load(const std::string& path);

  void add(Passage p);

  const std::vector<Passage>& passages() const { return passages_; }
  std::size_t size() const { return passages_.size(); }
  const Passage& at(std::size_t i) const { return passages_[i]; }
  const Passage* find(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  void save_tsv(const std::string& path) const;

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dpr
