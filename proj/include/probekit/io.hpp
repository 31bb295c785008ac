#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace probekit {

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Throws FileNotFound or IoError.
std::string read_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of `v`.
std::string format_double(double v);
/// Throws ParseError unless the whole string is a number.
double parse_double(std::string_view text);

}  // namespace probekit
