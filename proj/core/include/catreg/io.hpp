#pragma once

// Small text helpers shared by the CSV/JSON writers.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace catreg::io {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Strict parse of a full field; throws std::invalid_argument on junk.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string_view> split(std::string_view line, char sep);

void write_text(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

}  // namespace catreg::io
