#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dropkit {

constexpr std::int64_t kMillisPerDay = 86'400'000;

/// Number of Unicode code points in a UTF-8 string (invalid bytes count as one each).
std::size_t utf8_length(std::string_view text);

std::string_view trim(std::string_view text);
std::string to_lower(std::string_view text);
bool contains_icase(std::string_view haystack, std::string_view needle);

/// Hex SHA-256 of the input.
std::string sha256_hex(std::string_view data);

/// Hex SHA-256 of a file's content. Throws Error(io) if it cannot be read.
std::string sha256_file(const std::string& path);

/// Derives an independent, reproducible sub-seed for a named stage.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stage);

std::string read_file(const std::string& path);
std::vector<std::string> split_lines(std::string_view text);

}  // namespace dropkit
