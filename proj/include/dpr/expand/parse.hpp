#pragma once

#include <string>
#include <vector>

namespace dpr {

// Extracts queries from a raw completion: one per line, enumeration
// prefixes ("1.", "1)", "-", "*", bullet, "Q:") stripped, blank lines
// dropped, case-insensitive dedup keeping the first occurrence. Throws
// EmptyExpansionError when nothing survives.
std::vector<std::string> parse_completion(const std::string& raw);

}  // namespace dpr
