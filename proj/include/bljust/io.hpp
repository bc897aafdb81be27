#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bljust {

// Shortest text that parses back to the same double.
std::string format_double(double x);

double parse_double(std::string_view text);

// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);

std::string read_file(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view text, char sep);

std::string_view trim(std::string_view text);

}  // namespace bljust
