#pragma once

// Small string helpers shared across modules.

#include <string>
#include <string_view>
#include <vector>

namespace shepherd {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);

/// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Case-insensitive ASCII search; returns npos when absent.
std::size_t find_ci(std::string_view haystack, std::string_view needle, std::size_t from = 0);

bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Lowercases, strips markdown emphasis/quotes/brackets and collapses whitespace.
std::string normalize_label_text(std::string_view s);

}  // namespace shepherd
