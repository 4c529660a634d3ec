#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace repmatch {

struct Instance {
  std::vector<double> features;
  std::size_t label = 0;
  std::map<std::string, std::string> meta;

  friend bool operator==(const Instance&, const Instance&) = default;
};

// Instance order is part of a dataset's identity: training visits instances
// in an order derived from it.
struct Dataset {
  std::string name;
  std::size_t classes = 0;
  std::vector<Instance> instances;
  std::string provenance;  // generator config (JSON) or source path

  std::size_t size() const { return instances.size(); }
  bool empty() const { return instances.empty(); }
  std::size_t feature_dim() const { return instances.empty() ? 0 : instances.front().features.size(); }

  // Nonempty, uniform feature length, finite features, labels < classes.
  // Throws DataError.
  void validate() const;
  std::vector<std::size_t> label_histogram() const;
};

// Overlap datasets use two labels.
inline constexpr std::size_t kEntail = 0;
inline constexpr std::size_t kNonEntail = 1;

struct FamilyOptions {
  double mean_scale = 1.0;  // std of each class-mean coordinate
  double noise = 1.0;       // within-class std per coordinate
  // Fraction of instances whose features are replaced by N(0, outlier_scale^2)
  // draws, unrelated to their label; marked meta["outlier"] = "1".
  double outlier_fraction = 0.0;
  double outlier_scale = 2.0;
};

// Gaussian class clusters. Class means depend only on family_seed, then move by
// shift * (variant noise drawn from variant_seed); instance noise comes from
// variant_seed. Labels cycle 0, 1, ..., classes-1 so the first n % classes
// labels get the extra instances. n = 0 yields an empty (invalid) dataset.
Dataset gen_family(std::uint64_t family_seed, std::uint64_t variant_seed, std::size_t n, std::size_t d,
                   std::size_t classes, double shift, const FamilyOptions& options = {});

// Class means gen_family would use; exposed for tests and diagnostics.
std::vector<std::vector<double>> family_means(std::uint64_t family_seed, std::uint64_t variant_seed,
                                              std::size_t d, std::size_t classes, double shift,
                                              const FamilyOptions& options = {});

enum class LabelRule {
  correlated,  // overlap > 0.5 -> entail (the training-set heuristic)
  anti,        // overlap > 0.5 -> non-entail (challenge set)
};

struct OverlapOptions {
  // Probability that an instance's rule label is inverted.
  double flip_probability = 0.0;
};

// Premise/hypothesis pairs as concatenated halves (p, h) of length d/2 each.
// The first floor(omega * d/2) coordinates of h copy p; omega is uniform in
// [lo, hi] and recorded in meta["overlap"]. d must be even.
Dataset gen_overlap(std::uint64_t seed, std::size_t n, std::size_t d, double lo, double hi, LabelRule rule,
                    const OverlapOptions& options = {});

// gen_overlap pairs over the full overlap range, labelled by overlap grade
// min(grades - 1, floor(omega * grades)). A generic pre-training task for
// networks that should encode the overlap cue.
Dataset overlap_grade_task(std::uint64_t seed, std::size_t n, std::size_t d, std::size_t grades);

// Leading coordinates on which the two halves agree.
std::size_t shared_prefix_length(const std::vector<double>& features);

// One JSON object per line: {"features": [...], "label": k, "meta": {...}}.
// classes defaults to max label + 1.
Dataset load_jsonl(const std::filesystem::path& path, std::optional<std::size_t> classes = std::nullopt);
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
std::string to_jsonl(const Dataset& dataset);
Dataset parse_jsonl(const std::string& text, const std::string& name,
                    std::optional<std::size_t> classes = std::nullopt);

struct MetaBin {
  std::string key;
  double lo = 0.0;
  double hi = 0.0;
  std::optional<std::size_t> label;  // additionally require this label
};

// Sampling without replacement, deterministic per seed. With a bin, only
// instances whose numeric meta[key] lies in [lo, hi] are eligible. Order of
// the result follows the draw.
Dataset sample_subset(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                      const std::optional<MetaBin>& bin = std::nullopt);

// Indices drawn by sample_subset, in draw order.
std::vector<std::size_t> sample_indices(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                                        const std::optional<MetaBin>& bin = std::nullopt);

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices, std::string name);
Dataset concat(const std::vector<Dataset>& parts, std::string name);

}  // namespace repmatch
