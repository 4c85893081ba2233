#pragma once

#include <filesystem>
#include <span>
#include <string>

namespace tlab {

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Shortest text with 17 significant digits; parses back to the same bits.
std::string format_double(double v);
// JSON array of doubles at full precision.
std::string format_double_array(std::span<const double> values);

}  // namespace tlab
