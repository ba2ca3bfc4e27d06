#pragma once

#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "flora/error.hpp"

namespace flora {

/// Flat `key=value` text: one pair per line, `#` starts a comment, blank
/// lines ignored, surrounding whitespace trimmed. Later keys overwrite
/// earlier ones.
using KeyValues = std::map<std::string, std::string>;

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

inline KeyValues parse_key_values(std::string_view text, const std::string& context = "config") {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(context + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ConfigError(context + ":" + std::to_string(line_no) + ": empty key");
    out[key] = detail::trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

inline std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline const std::string& require_key(const KeyValues& kv, const std::string& key,
                                      const std::string& context) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw FormatError(context + ": missing key '" + key + "'");
  return it->second;
}

}  // namespace flora
