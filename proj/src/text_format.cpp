#include "evclip/text_format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "evclip/error.hpp"

namespace evclip {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<KeyValueLine> parse_key_value_lines(const std::string& text, bool allow_sections) {
  std::vector<KeyValueLine> out;
  std::istringstream in(text);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(number);
    if (line.front() == '[') {
      if (!allow_sections) throw FormatError(where + ": sections are not allowed here");
      if (line.back() != ']') throw FormatError(where + ": unterminated section header");
      out.push_back({number, trim(line.substr(1, line.size() - 2)), {}, true});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where + ": expected 'key = value'");
    KeyValueLine kv{number, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), false};
    if (kv.key.empty()) throw FormatError(where + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(const std::string& text, const std::string& where) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError(where + "'" + text + "' is not a number");
  return v;
}

long long parse_int(const std::string& text, const std::string& where) {
  long long v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw FormatError(where + "'" + text + "' is not an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw FormatError(where + "'" + text + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& where) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw FormatError(where + "'" + text + "' is not a boolean");
}

}  // namespace evclip
