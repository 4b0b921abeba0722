#pragma once

// Line-oriented `key = value` text shared by configs, metrics and reports.
// '#' starts a comment; `[name]` lines open a section where allowed.

#include <cstdint>
#include <string>
#include <vector>

namespace evclip {

struct KeyValueLine {
  int number = 0;  ///< 1-based line number
  std::string key;
  std::string value;
  bool is_section = false;  ///< `[key]` line; value is empty
};

/// Throws FormatError naming the line for malformed input.
std::vector<KeyValueLine> parse_key_value_lines(const std::string& text, bool allow_sections);

/// Shortest decimal that parses back to the same double ("%.17g" fallback).
std::string format_real(double v);

double parse_real(const std::string& text, const std::string& where);
long long parse_int(const std::string& text, const std::string& where);
std::uint64_t parse_u64(const std::string& text, const std::string& where);
bool parse_bool(const std::string& text, const std::string& where);

std::string trim(const std::string& s);

}  // namespace evclip
