#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dpr {

// Written next to every artifact a command produces: the resolved
// configuration, seed and input digests are sufficient to re-execute the
// run and reproduce the artifact bit-for-bit.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::string resolved_config;  // key = value text
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
  std::vector<std::string> outputs;
  std::string version;
  std::string created_at;

  void add_input(const std::string& path);  // digests the file
  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

std::string dpr_version_string();

}  // namespace dpr
