#include "repmatch/grassmann.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>

#include "repmatch/error.hpp"

namespace repmatch {

Matrix singular_basis(const Matrix& delta, const GrassmannOptions& options) {
  if (frobenius_norm_sq(delta) == 0.0) throw DegenerateError("zero matrix has no singular subspace");
  const SvdResult f = svd(delta, options.svd);
  const std::size_t rank = effective_rank(f.singular_values, options.rank_tol);
  const Matrix& factor = options.subspace == Subspace::right ? f.right : f.left;
  return top_columns(factor, rank);
}

Matrix adapter_basis(const LoraAdapter& adapter, const GrassmannOptions& options) {
  if (options.rank1_fast_path && adapter.rank() == 1) {
    const double a_norm = norm(adapter.a.entries());
    const double b_norm = norm(adapter.b.entries());
    if (a_norm == 0.0 || b_norm == 0.0) {
      throw DegenerateError("layer " + adapter.layer_id + " has a zero adaptation matrix");
    }
    if (options.subspace == Subspace::right) return scaled(adapter.b.transpose(), 1.0 / b_norm);
    return scaled(adapter.a, 1.0 / a_norm);
  }
  try {
    return singular_basis(compose(adapter), options);
  } catch (const DegenerateError&) {
    throw DegenerateError("layer " + adapter.layer_id + " has a zero adaptation matrix");
  }
}

double grassmann_phi(const Matrix& w1, const Matrix& w2, std::size_t i, std::size_t j,
                     const GrassmannOptions& options) {
  if (w1.rows() != w2.rows() || w1.cols() != w2.cols()) {
    throw DataError("grassmann_phi: matrices differ in shape");
  }
  const Matrix u1 = singular_basis(w1, options);
  const Matrix u2 = singular_basis(w2, options);
  if (i == 0 || i > u1.cols() || j == 0 || j > u2.cols()) {
    throw DataError("grassmann_phi: (i, j) = (" + std::to_string(i) + ", " + std::to_string(j) +
                    ") outside effective ranks (" + std::to_string(u1.cols()) + ", " +
                    std::to_string(u2.cols()) + ")");
  }
  const Matrix overlap = matmul_tn(top_columns(u1, i), top_columns(u2, j));
  return frobenius_norm_sq(overlap) / static_cast<double>(std::min(i, j));
}

SimilarityGrid grid_from_bases(const Matrix& basis1, const Matrix& basis2, std::string layer_id) {
  if (basis1.rows() != basis2.rows()) {
    throw DataError("similarity grid: bases live in different dimensions (" +
                    std::to_string(basis1.rows()) + " vs " + std::to_string(basis2.rows()) + ")");
  }
  const Matrix overlap = matmul_tn(basis1, basis2);
  const std::size_t r = overlap.rows();
  const std::size_t rp = overlap.cols();
  // prefix(i, j) = sum of squared overlaps over the leading i x j block.
  std::vector<double> prefix((r + 1) * (rp + 1), 0.0);
  for (std::size_t i = 1; i <= r; ++i)
    for (std::size_t j = 1; j <= rp; ++j) {
      const double p = overlap(i - 1, j - 1);
      prefix[i * (rp + 1) + j] = p * p + prefix[(i - 1) * (rp + 1) + j] +
                                 prefix[i * (rp + 1) + j - 1] - prefix[(i - 1) * (rp + 1) + j - 1];
    }
  SimilarityGrid grid{std::move(layer_id), r, rp, std::vector<double>(r * rp)};
  for (std::size_t i = 1; i <= r; ++i)
    for (std::size_t j = 1; j <= rp; ++j)
      grid.values[(i - 1) * rp + (j - 1)] =
          prefix[i * (rp + 1) + j] / static_cast<double>(std::min(i, j));
  return grid;
}

SimilarityGrid similarity_grid(const Matrix& d1, const Matrix& d2, const GrassmannOptions& options,
                               std::string layer_id) {
  if (d1.rows() != d2.rows() || d1.cols() != d2.cols()) {
    throw DataError("similarity grid: matrices differ in shape");
  }
  return grid_from_bases(singular_basis(d1, options), singular_basis(d2, options), std::move(layer_id));
}

double layer_repmatch(const SimilarityGrid& grid) {
  if (grid.values.empty()) throw DataError("layer_repmatch: empty grid");
  return *std::max_element(grid.values.begin(), grid.values.end());
}

PreparedBundle prepare_bundle(const AdapterBundle& bundle, const GrassmannOptions& options) {
  bundle.validate();
  PreparedBundle out;
  out.tag = {bundle.model_tag, content_hash(bundle)};
  const auto n = static_cast<std::int64_t>(bundle.layers.size());
  std::vector<std::optional<Matrix>> bases(bundle.layers.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (n > 1)
  for (std::int64_t l = 0; l < n; ++l) {
    try {
      bases[static_cast<std::size_t>(l)] = adapter_basis(bundle.layers[static_cast<std::size_t>(l)], options);
    } catch (...) {
#pragma omp critical(repmatch_prepare_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) {
    // Report the first failing layer in bundle order, independent of scheduling.
    for (const auto& layer : bundle.layers) adapter_basis(layer, options);
    std::rethrow_exception(failure);
  }
  for (std::size_t l = 0; l < bundle.layers.size(); ++l) {
    out.layer_ids.push_back(bundle.layers[l].layer_id);
    out.bases.push_back(std::move(*bases[l]));
  }
  return out;
}

RepMatchReport model_repmatch(const PreparedBundle& b1, const PreparedBundle& b2) {
  std::map<std::string, std::size_t> index2;
  for (std::size_t l = 0; l < b2.layer_ids.size(); ++l) index2[b2.layer_ids[l]] = l;
  if (b1.layer_ids.size() != b2.layer_ids.size()) {
    throw DataError("model_repmatch: bundles have different layer sets");
  }
  for (const auto& id : b1.layer_ids) {
    if (!index2.contains(id)) throw DataError("model_repmatch: layer " + id + " missing from second bundle");
  }

  RepMatchReport report;
  report.first = b1.tag;
  report.second = b2.tag;
  report.per_layer.resize(b1.layer_ids.size());
  for (std::size_t l = 0; l < b1.layer_ids.size(); ++l) {
    const Matrix& other = b2.bases[index2.at(b1.layer_ids[l])];
    SimilarityGrid grid = grid_from_bases(b1.bases[l], other, b1.layer_ids[l]);
    const double score = layer_repmatch(grid);
    report.per_layer[l] = {b1.layer_ids[l], std::move(grid), score};
  }
  double sum = 0.0;
  for (const auto& layer : report.per_layer) sum += layer.score;
  report.model_score = sum / static_cast<double>(report.per_layer.size());
  return report;
}

RepMatchReport model_repmatch(const AdapterBundle& b1, const AdapterBundle& b2,
                              const GrassmannOptions& options) {
  if (b1.layers.size() != b2.layers.size()) {
    throw DataError("model_repmatch: bundles have different layer sets");
  }
  for (const auto& layer : b1.layers) {
    const LoraAdapter* match = b2.find(layer.layer_id);
    if (match == nullptr) throw DataError("model_repmatch: layer " + layer.layer_id + " missing from second bundle");
    if (match->dim() != layer.dim()) {
      throw DataError("model_repmatch: layer " + layer.layer_id + " has different dimensions");
    }
  }
  return model_repmatch(prepare_bundle(b1, options), prepare_bundle(b2, options));
}

}  // namespace repmatch
