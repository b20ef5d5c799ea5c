#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

// Locale-independent number formatting and small text helpers shared by the
// dataset, checkpoint, config and metrics formats.
namespace sogclr::text {

/// Shortest decimal form that parses back to the same double ("0.5", "1e-08").
std::string format_double(double value);

double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view line, char sep);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace sogclr::text
