#include "dpr/train/report.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "dpr/error.hpp"

namespace dpr {

void TrainReport::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("train report: cannot write " + path);
  nlohmann::ordered_json header;
  header["record"] = "header";
  header["stage_boundary"] = stage_boundary;
  header["stage2_entry_digest"] = stage2_entry_digest;
  header["skipped_documents"] = skipped_documents;
  out << header.dump() << "\n";
  for (const auto& s : steps) {
    nlohmann::ordered_json rec;
    rec["step"] = s.step;
    rec["lr"] = s.lr;
    rec["loss"] = s.loss_total;
    if (std::isfinite(s.l_enc)) rec["l_enc"] = s.l_enc;
    if (std::isfinite(s.l_dec)) rec["l_dec"] = s.l_dec;
    if (std::isfinite(s.l_ext)) rec["l_ext"] = s.l_ext;
    if (std::isfinite(s.l_cl)) rec["l_cl"] = s.l_cl;
    out << rec.dump() << "\n";
  }
}

TrainReport TrainReport::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("train report: cannot read " + path);
  TrainReport r;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("train report: " + path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.value("record", "") == "header") {
      r.stage_boundary = rec.value("stage_boundary", 0L);
      r.stage2_entry_digest = rec.value("stage2_entry_digest", "");
      r.skipped_documents = rec.value("skipped_documents", 0L);
      continue;
    }
    StepLog s;
    s.step = rec.at("step").get<long>();
    s.lr = rec.at("lr").get<double>();
    s.loss_total = rec.at("loss").get<double>();
    if (rec.contains("l_enc")) s.l_enc = rec["l_enc"].get<double>();
    if (rec.contains("l_dec")) s.l_dec = rec["l_dec"].get<double>();
    if (rec.contains("l_ext")) s.l_ext = rec["l_ext"].get<double>();
    if (rec.contains("l_cl")) s.l_cl = rec["l_cl"].get<double>();
    r.steps.push_back(s);
  }
  return r;
}

}  // namespace dpr
