#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "repmatch/adapter.hpp"
#include "repmatch/data.hpp"
#include "repmatch/grassmann.hpp"
#include "repmatch/model.hpp"

namespace repmatch {

struct RankedInstance {
  std::size_t index = 0;
  double score = 0.0;
  bool degenerate = false;  // adapters collapsed to zero; scored 0
};

struct Ranking {
  std::string dataset;
  std::uint64_t ref_bundle_hash = 0;
  std::vector<RankedInstance> entries;  // descending score, ties by index
  nlohmann::json config;
};

struct RunOptions {
  // 0 = OpenMP default.
  int threads = 0;
  GrassmannOptions grassmann;
};

struct RankOptions : RunOptions {
  std::size_t instance_steps = 10;
};

// Fine-tunes one fresh set of adapters per dataset from the same checkpoint and
// compares them. Throws DegenerateError if either run collapses.
RepMatchReport compare_datasets(const Checkpoint& ckpt, const Dataset& a, const Dataset& b, const TrainConfig& cfg_a,
                                const TrainConfig& cfg_b, const GrassmannOptions& options = {});
RepMatchReport compare_datasets(const Checkpoint& ckpt, const Dataset& a, const Dataset& b, const TrainConfig& cfg,
                                const GrassmannOptions& options = {});

// Every instance starts from the same reset state (checkpoint plus adapters
// drawn from cfg.seed), takes instance_steps SGD steps on itself alone at batch
// size 1, and is scored by model RepMatch against ref_bundle. Instances are
// independent, so the result does not depend on the thread count.
Ranking rank_instances(const Checkpoint& ckpt, const Dataset& ds, const AdapterBundle& ref_bundle,
                       const TrainConfig& cfg, const RankOptions& options = {});
// Single-threaded reference path; must agree with rank_instances exactly.
Ranking rank_instances_serial(const Checkpoint& ckpt, const Dataset& ds, const AdapterBundle& ref_bundle,
                              const TrainConfig& cfg, const RankOptions& options = {});

// Score of a single instance against prepared reference subspaces.
RankedInstance score_instance(const Checkpoint& ckpt, const Instance& instance, std::size_t index,
                              std::size_t classes, const PreparedBundle& ref, const TrainConfig& cfg,
                              const RankOptions& options);

struct ReportRow {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> labels;
  std::map<std::string, double> values;
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::json config;
  std::vector<ReportRow> rows;

  std::vector<std::uint64_t> seeds() const;
};

enum class SelectStrategy { top, random };

struct Selection {
  SelectStrategy strategy = SelectStrategy::top;
  std::uint64_t seed = 0;  // used by random
};

// Indices of the chosen k-subset in ascending dataset order.
std::vector<std::size_t> select_indices(const Ranking& ranking, std::size_t dataset_size, std::size_t k,
                                        const Selection& selection);

// Fine-tunes on the selected k-subset and evaluates on test_ds. The row holds
// strategy, k, accuracy and the label histogram of the subset.
ExperimentReport select_and_eval(const Checkpoint& ckpt, const Dataset& ds, const Dataset& test_ds,
                                 const Ranking& ranking, std::size_t k, const Selection& selection,
                                 const TrainConfig& cfg);

// top and random(seed) for every k.
ExperimentReport sweep_k(const Checkpoint& ckpt, const Dataset& ds, const Dataset& test_ds, const Ranking& ranking,
                         const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds,
                         const TrainConfig& cfg);

// Percentage of cross cosine similarities strictly above threshold, after
// seeded subsampling of each side to at most cap vectors.
double cls_baseline(const std::vector<std::vector<double>>& reps_a, const std::vector<std::vector<double>>& reps_b,
                    double threshold = 0.9, std::size_t cap = 10000, std::uint64_t seed = 0,
                    const RunOptions& options = {});

double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct OverlapBin {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

std::vector<OverlapBin> default_overlap_bins();

struct ProbeOptions : RunOptions {
  std::size_t probe_n = 300;
  std::size_t repeats = 3;
};

// Trains a reference bundle on the challenge set, then for every bin and
// repeat samples probe_n non-entail instances of that overlap from the
// training-style set, fine-tunes on them and scores against the reference.
// One row per bin: lo, hi, mean, sd and repmatch_<r> for each repeat r, which
// used probe_seed(cfg.seed, r) for sampling and training.
ExperimentReport overlap_probe(const Checkpoint& ckpt, const Dataset& training_style, const Dataset& challenge,
                               const std::vector<OverlapBin>& bins, const TrainConfig& cfg,
                               const ProbeOptions& options = {});

// Seed used for the given probe repeat; independent of the repeat count.
std::uint64_t probe_seed(std::uint64_t run_seed, std::size_t repeat);

}  // namespace repmatch
