#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace zshot::io {

/// Shortest text form that parses back to the identical double.
std::string fmt(double v);
double parse_double(std::string_view s);
long long parse_int(std::string_view s);
std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);

std::vector<std::string> read_lines(const std::filesystem::path& p);
void write_text(const std::filesystem::path& p, const std::string& content);
std::string read_text(const std::filesystem::path& p);

/// 64-bit FNV-1a, used for content hashes in run manifests.
std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);

}  // namespace zshot::io
