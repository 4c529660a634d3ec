#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace repmatch {

std::vector<std::byte> read_binary(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over the target, so
// readers never observe a partial file.
void write_atomic(const std::filesystem::path& path, std::span<const std::byte> bytes);
void write_atomic(const std::filesystem::path& path, std::string_view text);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace repmatch
