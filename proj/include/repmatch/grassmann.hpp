#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "repmatch/adapter.hpp"
#include "repmatch/linalg.hpp"

namespace repmatch {

enum class Subspace { right, left };

struct GrassmannOptions {
  Subspace subspace = Subspace::right;
  double rank_tol = 1e-10;
  // For nominal rank-1 adapters the singular vector is the normalized factor,
  // so the SVD can be skipped.
  bool rank1_fast_path = true;
  SvdOptions svd;
};

// Orthonormal d x r_eff basis of the chosen singular subspace of delta,
// columns ordered by descending singular value. Throws DegenerateError for a
// zero matrix.
Matrix singular_basis(const Matrix& delta, const GrassmannOptions& options = {});
Matrix adapter_basis(const LoraAdapter& adapter, const GrassmannOptions& options = {});

// ‖U1[:, :i]ᵀ U2[:, :j]‖²_F / min(i, j), with U the singular bases of w1, w2.
// Requires 1 <= i <= effective_rank(w1), 1 <= j <= effective_rank(w2).
double grassmann_phi(const Matrix& w1, const Matrix& w2, std::size_t i, std::size_t j,
                     const GrassmannOptions& options = {});

struct SimilarityGrid {
  std::string layer_id;
  std::size_t r = 0;        // rows: effective rank of the first matrix
  std::size_t r_prime = 0;  // cols: effective rank of the second matrix
  std::vector<double> values;

  // 1-based, matching the (i, j) of grassmann_phi.
  double at(std::size_t i, std::size_t j) const { return values[(i - 1) * r_prime + (j - 1)]; }
};

// Grid over all leading-subspace pairs of two orthonormal bases with the same
// number of rows.
SimilarityGrid grid_from_bases(const Matrix& basis1, const Matrix& basis2, std::string layer_id = {});
SimilarityGrid similarity_grid(const Matrix& d1, const Matrix& d2, const GrassmannOptions& options = {},
                               std::string layer_id = {});

// Largest grid entry.
double layer_repmatch(const SimilarityGrid& grid);

struct LayerScore {
  std::string layer_id;
  SimilarityGrid grid;
  double score = 0.0;
};

struct BundleTag {
  std::string model_tag;
  std::uint64_t content_hash = 0;
};

struct RepMatchReport {
  std::vector<LayerScore> per_layer;
  double model_score = 0.0;
  BundleTag first;
  BundleTag second;
};

// Per-layer bases computed once, for comparing one bundle against many.
struct PreparedBundle {
  BundleTag tag;
  std::vector<std::string> layer_ids;
  std::vector<Matrix> bases;
};

PreparedBundle prepare_bundle(const AdapterBundle& bundle, const GrassmannOptions& options = {});

// Layer-wise max over the grid, mean over layers. Layers are matched by id and
// reported in the order of the first bundle. Per-layer work may run in
// parallel; the reduction is ordered.
RepMatchReport model_repmatch(const PreparedBundle& b1, const PreparedBundle& b2);
RepMatchReport model_repmatch(const AdapterBundle& b1, const AdapterBundle& b2,
                              const GrassmannOptions& options = {});

}  // namespace repmatch
