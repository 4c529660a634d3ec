#pragma once

// RAB1 container shared by adapter bundles and checkpoints:
//
//   bytes 0..3     magic "RAB1"
//   bytes 4..11    manifest length N, unsigned 64-bit little-endian
//   bytes 12..12+N UTF-8 JSON manifest
//   remainder      blob region: row-major IEEE-754 float32 little-endian
//
// Offsets in the manifest are byte offsets from the start of the blob region.
// The content hash is FNV-1a 64 over the blob region.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "repmatch/linalg.hpp"

namespace repmatch::rab {

inline constexpr char kMagic[4] = {'R', 'A', 'B', '1'};
inline constexpr int kFormatVersion = 1;

// Accumulates float32 blobs and assembles the final file image.
class Writer {
 public:
  // Appends m and returns its offset inside the blob region.
  std::uint64_t add(const Matrix& m);
  std::uint64_t blob_bytes() const { return blobs_.size(); }
  std::uint64_t content_hash() const;
  std::vector<std::byte> finish(const nlohmann::json& manifest) const;

 private:
  std::vector<std::byte> blobs_;
};

struct Container {
  nlohmann::json manifest;
  std::vector<std::byte> blobs;

  std::uint64_t content_hash() const;
  // Reads rows x cols floats at offset; throws FormatError when out of range
  // or non-finite.
  Matrix read(std::uint64_t offset, std::size_t rows, std::size_t cols) const;
};

Container parse(std::span<const std::byte> bytes);
Container read_file(const std::filesystem::path& path);

// Rounds every entry through float32, the precision stored on disk.
Matrix to_f32_lattice(const Matrix& m);
double to_f32_lattice(double v);

}  // namespace repmatch::rab
