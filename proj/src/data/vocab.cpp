#include "dpr/data/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "dpr/error.hpp"

namespace dpr {

namespace {

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

const std::string kSpecialNames[Vocab::kNumSpecials] = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[m]"};

}  // namespace

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab Vocab::build(const std::vector<Passage>& corpus, std::size_t max_size, int min_freq) {
  if (corpus.empty()) throw DataError("build_vocab: empty corpus");
  if (max_size <= kNumSpecials)
    throw ContractError("build_vocab: max_size must exceed the " +
                        std::to_string(kNumSpecials) + " specials");
  // std::map keys are ordered, which settles frequency ties lexicographically
  // without a second pass.
  std::map<std::string, long> freq;
  for (const auto& p : corpus)
    for (auto& t : word_tokens(p.text)) freq[t] += 1;

  std::vector<std::pair<std::string, long>> ranked;
  ranked.reserve(freq.size());
  for (auto& [tok, n] : freq)
    if (n >= min_freq) ranked.emplace_back(tok, n);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  const std::size_t cap = max_size - kNumSpecials;
  for (const auto& [tok, n] : ranked) {
    if (v.body_.size() >= cap) break;
    v.body_.push_back(tok);
  }
  v.rebuild_index();
  return v;
}

void Vocab::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < body_.size(); ++i)
    index_[body_[i]] = static_cast<int>(i) + kNumSpecials;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("vocab: cannot write " + path);
  for (const auto& t : body_) out << t << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("vocab: cannot read " + path);
  Vocab v;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty())
      throw DataError("vocab: empty token at " + path + ":" + std::to_string(line_no));
    v.body_.push_back(line);
  }
  v.rebuild_index();
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= size())
    throw IndexError("vocab: id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(size()));
  if (id < kNumSpecials) return kSpecialNames[id];
  return body_[static_cast<std::size_t>(id - kNumSpecials)];
}

std::vector<int> Vocab::encode_body(const std::string& text) const {
  std::vector<int> out;
  for (const auto& t : word_tokens(text)) out.push_back(id(t));
  return out;
}

std::vector<int> tokenize(const std::string& text, const Vocab& vocab, std::size_t max_len) {
  if (max_len < 2) throw ContractError("tokenize: max_len must be at least 2");
  std::vector<int> body = vocab.encode_body(text);
  if (body.size() > max_len - 2) body.resize(max_len - 2);
  std::vector<int> out;
  out.reserve(body.size() + 2);
  out.push_back(Vocab::kCls);
  out.insert(out.end(), body.begin(), body.end());
  out.push_back(Vocab::kSep);
  return out;
}

std::string detokenize(std::span<const int> ids, const Vocab& vocab) {
  std::string out;
  for (int id : ids) {
    if (Vocab::is_special(id)) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

}  // namespace dpr
