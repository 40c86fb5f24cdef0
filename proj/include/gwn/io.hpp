#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gwn {

/// Shortest round-trip decimal form of a double (std::to_chars); the same
/// value always prints the same bytes.
std::string format_double(double v);

/// Write content to a temp file in the same directory, then rename over the
/// target, so a crash never leaves a half-written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

/// Rows of doubles <-> CSV without header. Parsing is strict: every row must
/// have `cols` fields.
std::string to_csv(const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> parse_csv(const std::string& text, int cols, const std::string& what);

/// Split one CSV line on commas (no quoting; our files never need it).
std::vector<std::string> split_csv_line(const std::string& line);

std::uint64_t fnv1a64(const std::string& data);

}  // namespace gwn
