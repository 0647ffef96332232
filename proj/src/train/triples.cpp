#include <fstream>

#include <json.hpp>

#include "dpr/error.hpp"
#include "dpr/train/finetune.hpp"

namespace dpr {

std::vector<FinetuneTriple> load_triples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("triples: cannot read " + path);
  std::vector<FinetuneTriple> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      FinetuneTriple t;
      t.query = rec.at("query").get<std::string>();
      t.positive_id = rec.at("positive_id").get<std::string>();
      if (rec.contains("negative_ids"))
        t.negative_ids = rec["negative_ids"].get<std::vector<std::string>>();
      if (t.positive_id.empty()) throw DataError("query has no positive");
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("triples: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("triples: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("triples: " + path + " holds no records");
  return out;
}

void save_triples(const std::string& path, const std::vector<FinetuneTriple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("triples: cannot write " + path);
  for (const auto& t : triples) {
    nlohmann::ordered_json rec;
    rec["query"] = t.query;
    rec["positive_id"] = t.positive_id;
    rec["negative_ids"] = t.negative_ids;
    out << rec.dump() << "\n";
  }
}

}  // namespace dpr
