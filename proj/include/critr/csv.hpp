#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace critr::csv {

// Splits one CSV record. Handles double-quoted fields with "" escapes;
// surrounding whitespace of unquoted fields is trimmed.
std::vector<std::string> split_line(std::string_view line);

// Empty fields and NA / NaN markers are treated as missing.
bool is_missing(std::string_view field);

std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_integer(std::string_view field);

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Quotes the field when it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

std::string_view trim(std::string_view s);

}  // namespace critr::csv
