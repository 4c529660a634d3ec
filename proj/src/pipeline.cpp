#include "repmatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>

#include <omp.h>

#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"
#include "repmatch/rng.hpp"

namespace repmatch {

namespace {

constexpr std::uint64_t kProbeStream = 31;
constexpr std::uint64_t kBaselineStreamA = 41;
constexpr std::uint64_t kBaselineStreamB = 42;

int resolve_threads(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

nlohmann::json config_echo(const TrainConfig& cfg) {
  return {{"rank", cfg.rank},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"learning_rate", cfg.learning_rate},
          {"seed", cfg.seed},
          {"init_scale", cfg.init_scale},
          {"train_head", cfg.train_head},
          {"full_finetune", cfg.full_finetune}};
}

const char* strategy_name(SelectStrategy s) { return s == SelectStrategy::top ? "top" : "random"; }

void sort_ranking(std::vector<RankedInstance>& entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const RankedInstance& x, const RankedInstance& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.index < y.index;
  });
}

Ranking make_ranking(const Dataset& ds, const AdapterBundle& ref, const PreparedBundle& prepared,
                     const TrainConfig& cfg, const RankOptions& options) {
  if (ref.base_checkpoint_hash == 0) throw DataError("reference bundle carries no checkpoint hash");
  Ranking ranking;
  ranking.dataset = ds.name;
  ranking.ref_bundle_hash = prepared.tag.content_hash;
  ranking.config = config_echo(cfg);
  ranking.config["instance_steps"] = options.instance_steps;
  ranking.config["subspace"] = options.grassmann.subspace == Subspace::right ? "right" : "left";
  return ranking;
}

void check_rank_inputs(const Checkpoint& ckpt, const Dataset& ds, const AdapterBundle& ref) {
  ds.validate();
  if (ref.base_checkpoint_hash != ckpt.hash()) {
    throw DataError("checkpoint hash mismatch: reference bundle was trained on " +
                    hash_to_hex(ref.base_checkpoint_hash) + ", checkpoint is " + hash_to_hex(ckpt.hash()));
  }
}

}  // namespace

RepMatchReport compare_datasets(const Checkpoint& ckpt, const Dataset& a, const Dataset& b, const TrainConfig& cfg_a,
                                const TrainConfig& cfg_b, const GrassmannOptions& options) {
  const FinetuneResult ra = finetune(ckpt, a, cfg_a);
  const FinetuneResult rb = finetune(ckpt, b, cfg_b);
  if (ra.degenerate) throw DegenerateError("fine-tuning on '" + a.name + "' left a zero adaptation matrix");
  if (rb.degenerate) throw DegenerateError("fine-tuning on '" + b.name + "' left a zero adaptation matrix");
  return model_repmatch(ra.bundle, rb.bundle, options);
}

RepMatchReport compare_datasets(const Checkpoint& ckpt, const Dataset& a, const Dataset& b, const TrainConfig& cfg,
                                const GrassmannOptions& options) {
  return compare_datasets(ckpt, a, b, cfg, cfg, options);
}

RankedInstance score_instance(const Checkpoint& ckpt, const Instance& instance, std::size_t index,
                              std::size_t classes, const PreparedBundle& ref, const TrainConfig& cfg,
                              const RankOptions& options) {
  Dataset single;
  single.name = "instance-" + std::to_string(index);
  single.classes = classes;
  single.instances.push_back(instance);
  TrainConfig local = cfg;
  local.epochs = options.instance_steps;
  local.batch_size = 1;
  const FinetuneResult result = finetune(ckpt, single, local);
  if (result.degenerate) return {index, 0.0, true};
  const PreparedBundle mine = prepare_bundle(result.bundle, options.grassmann);
  return {index, model_repmatch(mine, ref).model_score, false};
}

Ranking rank_instances(const Checkpoint& ckpt, const Dataset& ds, const AdapterBundle& ref_bundle,
                       const TrainConfig& cfg, const RankOptions& options) {
  check_rank_inputs(ckpt, ds, ref_bundle);
  const PreparedBundle ref = prepare_bundle(ref_bundle, options.grassmann);
  Ranking ranking = make_ranking(ds, ref_bundle, ref, cfg, options);
  std::vector<RankedInstance> scores(ds.size());
  std::exception_ptr failure;
  const auto n = static_cast<std::int64_t>(ds.size());
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(options.threads))
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      scores[idx] = score_instance(ckpt, ds.instances[idx], idx, ds.classes, ref, cfg, options);
    } catch (...) {
#pragma omp critical(repmatch_rank_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  sort_ranking(scores);
  ranking.entries = std::move(scores);
  return ranking;
}

Ranking rank_instances_serial(const Checkpoint& ckpt, const Dataset& ds, const AdapterBundle& ref_bundle,
                              const TrainConfig& cfg, const RankOptions& options) {
  check_rank_inputs(ckpt, ds, ref_bundle);
  const PreparedBundle ref = prepare_bundle(ref_bundle, options.grassmann);
  Ranking ranking = make_ranking(ds, ref_bundle, ref, cfg, options);
  for (std::size_t i = 0; i < ds.size(); ++i)
    ranking.entries.push_back(score_instance(ckpt, ds.instances[i], i, ds.classes, ref, cfg, options));
  sort_ranking(ranking.entries);
  return ranking;
}

std::vector<std::uint64_t> ExperimentReport::seeds() const {
  std::set<std::uint64_t> unique;
  for (const auto& row : rows) unique.insert(row.seed);
  return {unique.begin(), unique.end()};
}

std::vector<std::size_t> select_indices(const Ranking& ranking, std::size_t dataset_size, std::size_t k,
                                        const Selection& selection) {
  if (k == 0 || k > dataset_size) {
    throw DataError("select: k=" + std::to_string(k) + " must be in [1, " + std::to_string(dataset_size) + "]");
  }
  std::vector<std::size_t> chosen;
  if (selection.strategy == SelectStrategy::top) {
    if (ranking.entries.size() != dataset_size) throw DataError("select: ranking does not cover the dataset");
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(ranking.entries[i].index);
  } else {
    std::vector<std::size_t> all(dataset_size);
    std::iota(all.begin(), all.end(), 0);
    Rng rng(selection.seed);
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(dataset_size - i)]);
    chosen.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

ExperimentReport select_and_eval(const Checkpoint& ckpt, const Dataset& ds, const Dataset& test_ds,
                                 const Ranking& ranking, std::size_t k, const Selection& selection,
                                 const TrainConfig& cfg) {
  ds.validate();
  test_ds.validate();
  const auto indices = select_indices(ranking, ds.size(), k, selection);
  const Dataset chosen = subset(ds, indices, ds.name + "-" + strategy_name(selection.strategy) + std::to_string(k));
  const FinetuneResult result = finetune(ckpt, chosen, cfg);

  ExperimentReport report;
  report.experiment = "select";
  report.config = config_echo(cfg);
  report.config["dataset"] = ds.name;
  report.config["test_dataset"] = test_ds.name;
  ReportRow row;
  row.seed = selection.strategy == SelectStrategy::random ? selection.seed : cfg.seed;
  row.labels["strategy"] = strategy_name(selection.strategy);
  row.values["k"] = static_cast<double>(k);
  row.values["accuracy"] = evaluate(result.net, test_ds);
  row.values["train_seed"] = static_cast<double>(cfg.seed);
  const auto hist = chosen.label_histogram();
  for (std::size_t c = 0; c < hist.size(); ++c) row.values["label_" + std::to_string(c)] = static_cast<double>(hist[c]);
  report.rows.push_back(std::move(row));
  return report;
}

ExperimentReport sweep_k(const Checkpoint& ckpt, const Dataset& ds, const Dataset& test_ds, const Ranking& ranking,
                         const std::vector<std::size_t>& ks, const std::vector<std::uint64_t>& seeds,
                         const TrainConfig& cfg) {
  ExperimentReport report;
  report.experiment = "sweep-k";
  report.config = config_echo(cfg);
  report.config["ks"] = ks;
  report.config["seeds"] = seeds;
  for (std::size_t k : ks) {
    for (std::uint64_t seed : seeds) {
      TrainConfig local = cfg;
      local.seed = seed;
      for (SelectStrategy strategy : {SelectStrategy::top, SelectStrategy::random}) {
        ExperimentReport one = select_and_eval(ckpt, ds, test_ds, ranking, k, {strategy, seed}, local);
        report.rows.push_back(std::move(one.rows.front()));
      }
    }
  }
  return report;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / (norm(a) * norm(b));
}

double cls_baseline(const std::vector<std::vector<double>>& reps_a, const std::vector<std::vector<double>>& reps_b,
                    double threshold, std::size_t cap, std::uint64_t seed, const RunOptions& options) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw DataError("cls_baseline: threshold must be in (0, 1)");
  if (cap == 0) throw DataError("cls_baseline: cap must be positive");
  if (reps_a.empty() || reps_b.empty()) throw DataError("cls_baseline: empty representation set");
  const std::size_t dim = reps_a.front().size();
  auto check = [&](const std::vector<std::vector<double>>& reps, const char* side) {
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (reps[i].size() != dim) throw DataError(std::string("cls_baseline: ") + side + "[" + std::to_string(i) + "] has the wrong length");
      if (norm(reps[i]) == 0.0) throw DataError(std::string("cls_baseline: ") + side + "[" + std::to_string(i) + "] is a zero vector");
    }
  };
  check(reps_a, "repsA");
  check(reps_b, "repsB");

  auto draw = [&](std::size_t size, std::uint64_t stream) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    if (size <= cap) return idx;
    Rng rng(mix_seed(seed, stream));
    for (std::size_t i = 0; i < cap; ++i) std::swap(idx[i], idx[i + rng.below(size - i)]);
    idx.resize(cap);
    return idx;
  };
  const auto ia = draw(reps_a.size(), kBaselineStreamA);
  const auto ib = draw(reps_b.size(), kBaselineStreamB);

  std::vector<double> norm_b(ib.size());
  for (std::size_t j = 0; j < ib.size(); ++j) norm_b[j] = norm(reps_b[ib[j]]);
  std::vector<std::size_t> above(ia.size(), 0);
  const auto rows = static_cast<std::int64_t>(ia.size());
#pragma omp parallel for schedule(static) num_threads(resolve_threads(options.threads))
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto& a = reps_a[ia[static_cast<std::size_t>(i)]];
    const double na = norm(a);
    std::size_t count = 0;
    for (std::size_t j = 0; j < ib.size(); ++j)
      if (dot(a, reps_b[ib[j]]) / (na * norm_b[j]) > threshold) ++count;
    above[static_cast<std::size_t>(i)] = count;
  }
  const std::size_t total = std::accumulate(above.begin(), above.end(), std::size_t{0});
  return 100.0 * static_cast<double>(total) / static_cast<double>(ia.size() * ib.size());
}

std::vector<OverlapBin> default_overlap_bins() {
  return {{"full", 1.0, 1.0}, {"mid", 0.6, 0.8}, {"no", 0.0, 0.0}};
}

std::uint64_t probe_seed(std::uint64_t run_seed, std::size_t repeat) {
  return mix_seed(mix_seed(run_seed, kProbeStream), repeat);
}

ExperimentReport overlap_probe(const Checkpoint& ckpt, const Dataset& training_style, const Dataset& challenge,
                               const std::vector<OverlapBin>& bins, const TrainConfig& cfg,
                               const ProbeOptions& options) {
  challenge.validate();
  training_style.validate();
  if (bins.empty()) throw DataError("overlap_probe: no bins");
  if (options.probe_n == 0 || options.repeats == 0) throw DataError("overlap_probe: probe_n and repeats must be positive");
  for (const auto& bin : bins) {
    if (!(0.0 <= bin.lo && bin.lo <= bin.hi && bin.hi <= 1.0)) throw DataError("overlap_probe: invalid bin " + bin.name);
  }
  const FinetuneResult ref = finetune(ckpt, challenge, cfg);
  if (ref.degenerate) throw DegenerateError("challenge-set fine-tune left a zero adaptation matrix");
  const PreparedBundle prepared = prepare_bundle(ref.bundle, options.grassmann);

  ExperimentReport report;
  report.experiment = "probe-overlap";
  report.config = config_echo(cfg);
  report.config["probe_n"] = options.probe_n;
  report.config["repeats"] = options.repeats;
  report.config["challenge"] = challenge.name;
  report.config["training_style"] = training_style.name;

  // Every (bin, repeat) job is independent; results land in fixed slots.
  const std::size_t jobs = bins.size() * options.repeats;
  std::vector<double> scores(jobs, 0.0);
  std::exception_ptr failure;
  const auto njobs = static_cast<std::int64_t>(jobs);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(options.threads))
  for (std::int64_t job = 0; job < njobs; ++job) {
    const auto j = static_cast<std::size_t>(job);
    const OverlapBin& bin = bins[j / options.repeats];
    const std::uint64_t seed = probe_seed(cfg.seed, j % options.repeats);
    try {
      const Dataset probe = sample_subset(training_style, options.probe_n, seed,
                                          MetaBin{"overlap", bin.lo, bin.hi, kNonEntail});
      TrainConfig local = cfg;
      local.seed = seed;
      const FinetuneResult run = finetune(ckpt, probe, local);
      if (run.degenerate) throw DegenerateError("probe fine-tune for bin " + bin.name + " collapsed");
      scores[j] = model_repmatch(prepare_bundle(run.bundle, options.grassmann), prepared).model_score;
    } catch (...) {
#pragma omp critical(repmatch_probe_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t b = 0; b < bins.size(); ++b) {
    const double* runs = scores.data() + b * options.repeats;
    double mean = 0.0;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) mean += runs[rep];
    mean /= static_cast<double>(options.repeats);
    double var = 0.0;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) var += (runs[rep] - mean) * (runs[rep] - mean);
    const double sd = options.repeats > 1 ? std::sqrt(var / static_cast<double>(options.repeats - 1)) : 0.0;
    ReportRow row;
    row.seed = cfg.seed;
    row.labels["bin"] = bins[b].name;
    row.values["lo"] = bins[b].lo;
    row.values["hi"] = bins[b].hi;
    row.values["mean"] = mean;
    row.values["sd"] = sd;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) row.values["repmatch_" + std::to_string(rep)] = runs[rep];
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace repmatch
