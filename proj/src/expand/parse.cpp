#include "dpr/expand/parse.hpp"

#include <cctype>
#include <set>

#include "dpr/error.hpp"

namespace dpr {

namespace {

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Removes one leading enumeration marker if present.
std::string strip_enumeration(std::string line) {
  // digits followed by '.' or ')'
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')'))
    return strip(line.substr(i + 1));
  if (!line.empty() && (line[0] == '-' || line[0] == '*')) return strip(line.substr(1));
  static const std::string bullet = "\xe2\x80\xa2";  // U+2022
  if (line.rfind(bullet, 0) == 0) return strip(line.substr(bullet.size()));
  if (line.size() >= 2 && (line[0] == 'Q' || line[0] == 'q') && line[1] == ':')
    return strip(line.substr(2));
  return line;
}

}  // namespace

std::vector<std::string> parse_completion(const std::string& raw) {
  std::vector<std::string> out;
  std::set<std::string> seen_lower;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t nl = raw.find('\n', pos);
    std::string line = raw.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = nl == std::string::npos ? raw.size() + 1 : nl + 1;

    line = strip_enumeration(strip(line));
    if (line.empty()) continue;
    std::string key = line;
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (seen_lower.insert(key).second) out.push_back(line);
  }
  if (out.empty()) throw EmptyExpansionError("completion yielded no queries after filtering");
  return out;
}

}  // namespace dpr
