#pragma once

// Small helpers shared by the line-oriented file parsers.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace radmarket::text {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string_view strip_comment(std::string_view line);
std::string_view trim(std::string_view s);
std::vector<std::string> tokenize(std::string_view line);
std::vector<std::string> split(std::string_view s, char sep);

int parse_int(std::string_view token);
/// Accepts "inf"/"-inf" in addition to ordinary decimal notation.
double parse_double(std::string_view token);
bool parse_bool(std::string_view token);

/// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

}  // namespace radmarket::text
