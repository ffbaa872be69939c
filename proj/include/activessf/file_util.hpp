#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace activessf {

// Writes to "<path>.tmp" and renames over `path`, so a reader never sees a
// partially written file under its final name.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);

// Throws DataError when the file cannot be read.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace activessf
