#include "dpr/data/corpus.hpp"

#include <fstream>

#include <json.hpp>

#include "dpr/error.hpp"

namespace dpr {

namespace {

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void Corpus::add(Passage p) {
  if (trimmed(p.text).empty())
    throw DataError("corpus: passage '" + p.id + "' has empty text");
  auto [it, inserted] = index_.emplace(p.id, passages_.size());
  if (!inserted) throw DataError("corpus: duplicate passage id '" + p.id + "'");
  passages_.push_back(std::move(p));
}

const Passage* Corpus::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &passages_[it->second];
}

Corpus Corpus::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("corpus: cannot read " + path);
  Corpus c;
  std::string line;
  long line_no = 0;
  bool format_known = false;
  bool jsonl = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    if (!format_known) {
      jsonl = trimmed(line).front() == '{';
      format_known = true;
    }
    try {
      Passage p;
      if (jsonl) {
        auto rec = nlohmann::json::parse(line);
        if (!rec.contains("id") || !rec.contains("text"))
          throw DataError("record lacks \"id\" or \"text\"");
        p.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
        p.text = rec["text"].get<std::string>();
      } else {
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("no tab separator");
        p.id = line.substr(0, tab);
        p.text = line.substr(tab + 1);
      }
      if (p.id.empty()) throw DataError("empty id");
      c.add(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("corpus: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (c.size() == 0) throw DataError("corpus: " + path + " holds no passages");
  return c;
}

void Corpus::save_tsv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("corpus: cannot write " + path);
  for (const auto& p : passages_) out << p.id << "\t" << p.text << "\n";
}

}  // namespace dpr
