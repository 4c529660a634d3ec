#include <cmath>
#include <set>

#include "doctest.h"
#include "repmatch/error.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"
#include "repmatch/pipeline.hpp"
#include "repmatch/report.hpp"

using namespace repmatch;

namespace {

const Checkpoint& ckpt() {
  static const Checkpoint c = pretrain(0, default_generic_task());
  return c;
}

std::vector<std::vector<double>> load_features(const std::string& name) {
  const Dataset ds = load_jsonl(std::filesystem::path(REPMATCH_FIXTURE_DIR) / name);
  std::vector<std::vector<double>> out;
  for (const auto& inst : ds.instances) out.push_back(inst.features);
  return out;
}

TrainConfig quick(std::uint64_t seed = 0) {
  TrainConfig cfg = TrainConfig::dataset_level();
  cfg.seed = seed;
  cfg.epochs = 3;
  return cfg;
}

}  // namespace

TEST_CASE("compare_datasets with identical inputs and seeds is exactly one") {
  const Dataset ds = gen_family(100, 1, 80, 32, 2, 0.0);
  const RepMatchReport r = compare_datasets(ckpt(), ds, ds, quick());
  CHECK(std::abs(r.model_score - 1.0) <= 1e-9);
  CHECK(r.first.content_hash == r.second.content_hash);
}

TEST_CASE("same data under different seeds beats unrelated tasks") {
  const Dataset a = gen_family(100, 1, 400, 32, 2, 0.0);
  const Dataset b = gen_family(200, 3, 400, 32, 2, 0.0);
  TrainConfig s0 = TrainConfig::dataset_level();
  TrainConfig s1 = s0;
  s1.seed = 1;
  const double same = compare_datasets(ckpt(), a, a, s0, s1).model_score;
  const double cross = compare_datasets(ckpt(), a, b, s0, s1).model_score;
  INFO("same " << same << " cross " << cross);
  CHECK(same > cross + 0.3);
}

TEST_CASE("compare_datasets propagates degenerate runs") {
  const Dataset ds = gen_family(100, 1, 20, 32, 2, 0.0);
  TrainConfig none = quick();
  none.epochs = 0;
  CHECK_THROWS_AS(compare_datasets(ckpt(), ds, ds, none), DegenerateError);
}

TEST_CASE("rank_instances basics") {
  const Dataset ds = gen_family(100, 1, 40, 32, 2, 0.0);
  const auto ref = finetune(ckpt(), ds, TrainConfig::dataset_level()).bundle;
  const std::uint64_t before = checksum(ckpt().base());

  const Dataset single = subset(ds, {3}, "single");
  CHECK(rank_instances(ckpt(), single, ref, TrainConfig::instance_level()).entries.size() == 1);

  const Dataset dup = subset(ds, {5, 7, 5}, "dup");
  const Ranking r = rank_instances(ckpt(), dup, ref, TrainConfig::instance_level());
  double score_a = -1.0;
  double score_b = -2.0;
  for (const auto& e : r.entries) {
    if (e.index == 0) score_a = e.score;
    if (e.index == 2) score_b = e.score;
  }
  CHECK(score_a == score_b);
  CHECK(checksum(ckpt().base()) == before);
  CHECK(r.ref_bundle_hash == content_hash(ref));
  CHECK(r.dataset == "dup");
}

TEST_CASE("ranking is sorted, complete and independent of threads") {
  const Dataset ds = gen_family(100, 1, 24, 32, 2, 0.0);
  const auto ref = finetune(ckpt(), ds, TrainConfig::dataset_level()).bundle;
  RankOptions one;
  one.threads = 1;
  RankOptions many;
  many.threads = 4;
  const Ranking serial = rank_instances_serial(ckpt(), ds, ref, TrainConfig::instance_level(), one);
  const Ranking parallel = rank_instances(ckpt(), ds, ref, TrainConfig::instance_level(), many);
  REQUIRE(serial.entries.size() == parallel.entries.size());
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < serial.entries.size(); ++i) {
    CHECK(serial.entries[i].index == parallel.entries[i].index);
    CHECK(serial.entries[i].score == parallel.entries[i].score);
    seen.insert(serial.entries[i].index);
    if (i > 0) CHECK(serial.entries[i - 1].score >= serial.entries[i].score);
    CHECK(serial.entries[i].score >= 0.0);
    CHECK(serial.entries[i].score <= 1.0 + 1e-9);
  }
  CHECK(seen.size() == ds.size());
  CHECK(serial.config.at("instance_steps") == 10);
}

TEST_CASE("rank_instances rejects a reference from another checkpoint") {
  const Dataset ds = gen_family(100, 1, 10, 32, 2, 0.0);
  auto ref = finetune(ckpt(), ds, quick()).bundle;
  ref.base_checkpoint_hash ^= 1;
  CHECK_THROWS_AS(rank_instances(ckpt(), ds, ref, TrainConfig::instance_level()), DataError);
}

TEST_CASE("degenerate instances score zero instead of failing") {
  const Dataset ds = gen_family(100, 1, 6, 32, 2, 0.0);
  const auto ref = finetune(ckpt(), ds, quick()).bundle;
  TrainConfig none = TrainConfig::instance_level();
  none.epochs = 0;
  RankOptions opts;
  opts.instance_steps = 0;
  const Ranking r = rank_instances(ckpt(), ds, ref, none, opts);
  for (const auto& e : r.entries) {
    CHECK(e.degenerate);
    CHECK(e.score == 0.0);
  }
}

TEST_CASE("select_indices") {
  Ranking r;
  for (std::size_t i = 0; i < 6; ++i) r.entries.push_back({(i * 4) % 6 + (i >= 3 ? 1 : 0), 1.0 - 0.1 * static_cast<double>(i)});
  const auto top = select_indices(r, 6, 3, {SelectStrategy::top, 0});
  CHECK(top == std::vector<std::size_t>{0, 2, 4});
  const auto rand1 = select_indices(r, 6, 3, {SelectStrategy::random, 9});
  CHECK(rand1 == select_indices(r, 6, 3, {SelectStrategy::random, 9}));
  CHECK(std::is_sorted(rand1.begin(), rand1.end()));
  CHECK(select_indices(r, 6, 6, {SelectStrategy::top, 0}) == select_indices(r, 6, 6, {SelectStrategy::random, 3}));
  CHECK_THROWS_AS(select_indices(r, 6, 7, {SelectStrategy::top, 0}), DataError);
  CHECK_THROWS_AS(select_indices(r, 6, 0, {SelectStrategy::top, 0}), DataError);
}

TEST_CASE("select_and_eval") {
  const Dataset train = gen_family(100, 1, 20, 32, 2, 0.0);
  const Dataset test = gen_family(100, 2, 30, 32, 2, 0.0);
  const auto ref = finetune(ckpt(), train, quick()).bundle;
  const Ranking ranking = rank_instances(ckpt(), train, ref, TrainConfig::instance_level());
  const ExperimentReport top = select_and_eval(ckpt(), train, test, ranking, 20, {SelectStrategy::top, 0}, quick());
  const ExperimentReport rnd = select_and_eval(ckpt(), train, test, ranking, 20, {SelectStrategy::random, 4}, quick());
  CHECK(top.rows.at(0).values.at("accuracy") == rnd.rows.at(0).values.at("accuracy"));
  const ExperimentReport again = select_and_eval(ckpt(), train, test, ranking, 8, {SelectStrategy::random, 4}, quick());
  const ExperimentReport again2 = select_and_eval(ckpt(), train, test, ranking, 8, {SelectStrategy::random, 4}, quick());
  CHECK(to_json(again) == to_json(again2));
  const auto& row = again.rows.at(0);
  CHECK(row.labels.at("strategy") == "random");
  CHECK(row.values.at("k") == 8.0);
  CHECK(row.values.at("label_0") + row.values.at("label_1") == 8.0);
  CHECK(row.seed == 4);
  CHECK(row.values.at("train_seed") == 0.0);
}

TEST_CASE("sweep_k rows carry their seeds") {
  const Dataset train = gen_family(100, 1, 20, 32, 2, 0.0);
  const Dataset test = gen_family(100, 2, 20, 32, 2, 0.0);
  const auto ref = finetune(ckpt(), train, quick()).bundle;
  const Ranking ranking = rank_instances(ckpt(), train, ref, TrainConfig::instance_level());
  const ExperimentReport rep = sweep_k(ckpt(), train, test, ranking, {4, 8}, {5, 6}, quick());
  CHECK(rep.rows.size() == 8);
  CHECK(rep.seeds() == std::vector<std::uint64_t>{5, 6});
}

TEST_CASE("cls baseline examples") {
  const std::vector<std::vector<double>> e1 = {{1.0, 0.0, 0.0}};
  const std::vector<std::vector<double>> e2 = {{0.0, 1.0, 0.0}};
  CHECK(cls_baseline(e1, e1) == 100.0);
  CHECK(cls_baseline(e1, e2) == 0.0);
}

TEST_CASE("cls baseline hand fixture") {
  const auto first = load_features("reps_first.jsonl");
  const auto second = load_features("reps_second.jsonl");
  const auto expected = nlohmann::json::parse(read_text(std::filesystem::path(REPMATCH_FIXTURE_DIR) / "reps.json"));
  const auto table = expected.at("cosines").get<std::vector<std::vector<double>>>();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(cosine(first[i], second[j]) - table[i][j]) <= 1e-15);
  CHECK(cls_baseline(first, second, 0.9) == 100.0 * 2.0 / 6.0);
  CHECK(cls_baseline(first, second, 0.9) == expected.at("percentage").get<double>());
  CHECK(cls_baseline(first, second, 0.9) == cls_baseline(second, first, 0.9));
  CHECK(cls_baseline(first, second, 0.55) == 100.0 * 4.0 / 6.0);
  CHECK(cls_baseline(first, second, 0.95) == 100.0 * 1.0 / 6.0);
}

TEST_CASE("cls baseline cap subsamples each side") {
  const auto first = load_features("reps_first.jsonl");
  const auto second = load_features("reps_second.jsonl");
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double p = cls_baseline(first, second, 0.9, 1, seed);
    CHECK((p == 0.0 || p == 100.0));
    const double q = cls_baseline(first, second, 0.9, 2, seed);
    CHECK(std::abs(q / 25.0 - std::round(q / 25.0)) <= 1e-12);
  }
  CHECK(cls_baseline(first, second, 0.9, 3, 1) == cls_baseline(first, second, 0.9, 10000, 2));
}

TEST_CASE("cls baseline errors") {
  const std::vector<std::vector<double>> ok = {{1.0, 0.0}};
  const std::vector<std::vector<double>> with_zero = {{1.0, 0.0}, {0.0, 0.0}};
  try {
    cls_baseline(ok, with_zero);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
  CHECK_THROWS_AS(cls_baseline(ok, {{1.0, 0.0, 0.0}}), DataError);
  CHECK_THROWS_AS(cls_baseline(ok, ok, 1.0), DataError);
  CHECK_THROWS_AS(cls_baseline(ok, ok, 0.0), DataError);
  CHECK_THROWS_AS(cls_baseline({}, ok), DataError);
  CHECK_THROWS_AS(cls_baseline(ok, ok, 0.9, 0), DataError);
}

TEST_CASE("overlap probe shape and determinism") {
  const Dataset training = concat({gen_overlap(7, 100, 32, 1.0, 1.0, LabelRule::correlated, {0.3}),
                                   gen_overlap(8, 100, 32, 0.6, 0.8, LabelRule::correlated, {0.3}),
                                   gen_overlap(9, 100, 32, 0.0, 0.0, LabelRule::correlated, {0.3})},
                                  "training-style");
  const Dataset challenge = gen_overlap(8, 100, 32, 0.0, 1.0, LabelRule::anti);
  TrainConfig cfg = quick(3);
  ProbeOptions one;
  one.probe_n = 20;
  one.repeats = 1;
  ProbeOptions three = one;
  three.repeats = 3;
  const ExperimentReport single = overlap_probe(ckpt(), training, challenge, {{"all", 0.0, 1.0}}, cfg, one);
  REQUIRE(single.rows.size() == 1);
  CHECK(single.rows[0].labels.at("bin") == "all");
  CHECK(single.rows[0].seed == 3);

  const auto bins = default_overlap_bins();
  REQUIRE(bins.size() == 3);
  const ExperimentReport r1 = overlap_probe(ckpt(), training, challenge, bins, cfg, one);
  const ExperimentReport r3 = overlap_probe(ckpt(), training, challenge, bins, cfg, three);
  REQUIRE(r3.rows.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(r1.rows[b].values.at("repmatch_0") == r3.rows[b].values.at("repmatch_0"));
    CHECK(r3.rows[b].values.count("repmatch_2") == 1);
    const double mean = (r3.rows[b].values.at("repmatch_0") + r3.rows[b].values.at("repmatch_1") +
                         r3.rows[b].values.at("repmatch_2")) / 3.0;
    CHECK(std::abs(r3.rows[b].values.at("mean") - mean) <= 1e-12);
    CHECK(r1.rows[b].values.at("sd") == 0.0);
  }
  CHECK(probe_seed(3, 0) != probe_seed(3, 1));
}

TEST_CASE("overlap probe errors") {
  const Dataset training = gen_overlap(7, 60, 32, 0.0, 0.5, LabelRule::correlated);
  const Dataset challenge = gen_overlap(8, 40, 32, 0.0, 1.0, LabelRule::anti);
  ProbeOptions opts;
  opts.probe_n = 5;
  opts.repeats = 1;
  CHECK_THROWS_AS(overlap_probe(ckpt(), training, challenge, {{"full", 1.0, 1.0}}, quick(), opts), DataError);
  CHECK_THROWS_AS(overlap_probe(ckpt(), training, challenge, {{"bad", 0.8, 0.2}}, quick(), opts), DataError);
  opts.probe_n = 0;
  CHECK_THROWS_AS(overlap_probe(ckpt(), training, challenge, {{"all", 0.0, 1.0}}, quick(), opts), DataError);
  Dataset empty_challenge{"e", 2, {}, ""};
  opts.probe_n = 5;
  CHECK_THROWS_AS(overlap_probe(ckpt(), training, empty_challenge, {{"all", 0.0, 1.0}}, quick(), opts), DataError);
}
