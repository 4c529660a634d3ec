#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "repmatch/linalg.hpp"

namespace repmatch {

// One low-rank update ΔW = a * b for a square d x d weight: a is d x r, b is
// r x d, r <= d.
struct LoraAdapter {
  std::string layer_id;
  Matrix a;
  Matrix b;

  LoraAdapter(std::string id, Matrix a_factor, Matrix b_factor);

  std::size_t dim() const { return a.rows(); }
  std::size_t rank() const { return a.cols(); }
};

Matrix compose(const LoraAdapter& adapter);

// Number of singular values of delta above tol * sigma_max.
std::size_t effective_rank(const Matrix& delta, double tol = 1e-10);

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::uint64_t epochs = 0;
  double learning_rate = 0.0;
  std::string dataset;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct AdapterBundle {
  std::string model_tag;
  std::uint64_t base_checkpoint_hash = 0;
  std::size_t rank = 0;
  std::vector<LoraAdapter> layers;
  TrainingMeta training_meta;

  // Shared rank, unique layer ids, at least one layer. Throws DataError.
  void validate() const;
  const LoraAdapter* find(const std::string& layer_id) const;
};

// FNV-1a 64 over the float32 blob region the bundle serializes to.
std::uint64_t content_hash(const AdapterBundle& bundle);

std::vector<std::byte> encode_bundle(const AdapterBundle& bundle);
AdapterBundle decode_bundle(std::span<const std::byte> bytes);
void save_bundle(const AdapterBundle& bundle, const std::filesystem::path& path);
AdapterBundle load_bundle(const std::filesystem::path& path);

// Random control: each layer's composed ΔW has its d*d entries permuted by a
// seeded Fisher-Yates shuffle and is re-factored at the bundle rank by a
// truncated SVD. Layers whose permutation leaves ΔW unchanged keep their
// factors.
AdapterBundle shuffle_entries(const AdapterBundle& bundle, std::uint64_t seed);

}  // namespace repmatch
