#include "repmatch/rab.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"

namespace repmatch::rab {

namespace {

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::byte>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::span<const std::byte> in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint64_t>(in[static_cast<std::size_t>(i)]);
  return v;
}

std::uint32_t get_u32(const std::byte* in) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint32_t>(in[i]);
  return v;
}

}  // namespace

double to_f32_lattice(double v) { return static_cast<double>(static_cast<float>(v)); }

Matrix to_f32_lattice(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.entries()) v = to_f32_lattice(v);
  return out;
}

std::uint64_t Writer::add(const Matrix& m) {
  const std::uint64_t offset = blobs_.size();
  blobs_.reserve(blobs_.size() + 4 * m.size());
  for (double v : m.entries()) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw DataError("value overflows float32 storage");
    put_u32(blobs_, std::bit_cast<std::uint32_t>(f));
  }
  return offset;
}

std::uint64_t Writer::content_hash() const { return fnv1a64(blobs_); }

std::vector<std::byte> Writer::finish(const nlohmann::json& manifest) const {
  const std::string text = manifest.dump();
  std::vector<std::byte> out;
  out.reserve(12 + text.size() + blobs_.size());
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  put_u64(out, text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  out.insert(out.end(), blobs_.begin(), blobs_.end());
  return out;
}

std::uint64_t Container::content_hash() const { return fnv1a64(blobs); }

Matrix Container::read(std::uint64_t offset, std::size_t rows, std::size_t cols) const {
  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  if (rows == 0 || cols == 0 || offset % 4 != 0 || offset > blobs.size() ||
      count * 4 > blobs.size() - offset) {
    throw FormatError("manifest/blob length mismatch: blob at offset " + std::to_string(offset) +
                      " with " + std::to_string(count) + " floats exceeds blob region of " +
                      std::to_string(blobs.size()) + " bytes");
  }
  std::vector<double> entries(count);
  const std::byte* base = blobs.data() + offset;
  for (std::uint64_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(get_u32(base + 4 * i));
    if (!std::isfinite(f)) throw FormatError("non-finite entry in blob at offset " + std::to_string(offset));
    entries[i] = static_cast<double>(f);
  }
  return Matrix(rows, cols, std::move(entries));
}

Container parse(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic");
  if (bytes.size() < 12) throw FormatError("truncated header");
  const std::uint64_t manifest_len = get_u64(bytes.subspan(4, 8));
  if (manifest_len > bytes.size() - 12) {
    throw FormatError("manifest/blob length mismatch: manifest length " +
                      std::to_string(manifest_len) + " exceeds file size");
  }
  const auto* text = reinterpret_cast<const char*>(bytes.data() + 12);
  Container c;
  try {
    c.manifest = nlohmann::json::parse(text, text + manifest_len);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  if (!c.manifest.is_object()) throw FormatError("malformed manifest: not an object");
  const auto version = c.manifest.find("format_version");
  if (version == c.manifest.end() || !version->is_number_integer() ||
      version->get<int>() != kFormatVersion) {
    throw FormatError("unknown format version");
  }
  c.blobs.assign(bytes.begin() + 12 + static_cast<std::ptrdiff_t>(manifest_len), bytes.end());
  if (const auto declared = c.manifest.find("blob_bytes"); declared != c.manifest.end()) {
    if (!declared->is_number_unsigned() || declared->get<std::uint64_t>() != c.blobs.size()) {
      throw FormatError("manifest/blob length mismatch: manifest declares " + declared->dump() +
                        " blob bytes, file holds " + std::to_string(c.blobs.size()));
    }
  }
  return c;
}

Container read_file(const std::filesystem::path& path) { return parse(read_binary(path)); }

}  // namespace repmatch::rab
