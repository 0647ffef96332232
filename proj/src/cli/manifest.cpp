#include "dpr/cli/manifest.hpp"

#include <fstream>

#include <json.hpp>

#include "dpr/digest.hpp"
#include "dpr/error.hpp"

#ifndef DPR_VERSION
#define DPR_VERSION "0.1.0"
#endif

namespace dpr {

std::string dpr_version_string() { return "dpr " DPR_VERSION; }

void RunManifest::add_input(const std::string& path) { inputs.emplace_back(path, file_digest(path)); }

void RunManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("manifest: cannot write " + path);
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = argv;
  j["resolved_config"] = resolved_config;
  j["seed"] = seed;
  auto in_arr = nlohmann::ordered_json::array();
  for (const auto& [p, d] : inputs) {
    nlohmann::ordered_json rec;
    rec["path"] = p;
    rec["digest"] = d;
    in_arr.push_back(rec);
  }
  j["inputs"] = in_arr;
  j["outputs"] = outputs;
  j["version"] = version.empty() ? dpr_version_string() : version;
  j["created_at"] = created_at;
  out << j.dump(2) << "\n";
}

RunManifest RunManifest::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("manifest: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest: " + path + ": " + e.what());
  }
  RunManifest m;
  m.command = j.value("command", "");
  m.argv = j.value("argv", std::vector<std::string>{});
  m.resolved_config = j.value("resolved_config", "");
  m.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("inputs"))
    for (const auto& rec : j["inputs"])
      m.inputs.emplace_back(rec.value("path", ""), rec.value("digest", ""));
  m.outputs = j.value("outputs", std::vector<std::string>{});
  m.version = j.value("version", "");
  m.created_at = j.value("created_at", "");
  return m;
}

}  // namespace dpr
