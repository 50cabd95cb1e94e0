#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace crowdnav {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_real(double x);
std::optional<double> parse_real(std::string_view s);
std::optional<long long> parse_int(std::string_view s);
std::optional<unsigned long long> parse_uint(std::string_view s);

/// Whitespace-separated tokens.
std::vector<std::string> split_ws(std::string_view s);
std::string_view trim(std::string_view s);

}  // namespace crowdnav
