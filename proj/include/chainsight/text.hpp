#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace chainsight::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Shortest decimal that round-trips the double ("10", "19.5", "0.00247").
std::string format_number(double value);

/// Fixed significant-digit rendering without trailing zeros ("1.3", "-0.7",
/// "0", "1.235" for 1.23456 at 4 digits).
std::string format_significant(double value, int digits);

std::vector<std::string> split(std::string_view s, char delim);

/// Case-folded word tokens: runs of ASCII alphanumerics or non-ASCII bytes.
std::vector<std::string> word_tokens(std::string_view s);

/// Upper-cases the first character when it is an ASCII letter.
std::string capitalize_first(std::string s);

/// Fields of one comma-separated line; double quotes group and escape ("").
/// Fields are trimmed.
std::vector<std::string> csv_fields(std::string_view line);

/// Whole-string decimal parse. Throws std::invalid_argument naming `what`.
double parse_number(const std::string& s, const std::string& what);

}  // namespace chainsight::text
