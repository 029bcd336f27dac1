#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace aggrisk {

/// Shortest decimal form that parses back to exactly the same double
/// (never more than 17 significant digits).
std::string format_double(double value);

/// Strict full-string numeric parses; return false on any trailing garbage.
bool parse_double(std::string_view text, double& out);
bool parse_u32(std::string_view text, std::uint32_t& out);
bool parse_u64(std::string_view text, std::uint64_t& out);

/// Splits on a separator, keeping empty fields.
std::vector<std::string_view> split(std::string_view text, char sep);

std::string to_lower(std::string_view text);

}  // namespace aggrisk
