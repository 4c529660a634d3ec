#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "repmatch/adapter.hpp"
#include "repmatch/data.hpp"
#include "repmatch/error.hpp"
#include "repmatch/grassmann.hpp"
#include "repmatch/hash.hpp"
#include "repmatch/io.hpp"
#include "repmatch/model.hpp"
#include "repmatch/pipeline.hpp"
#include "repmatch/report.hpp"

namespace repmatch::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a RunManifest records about one invocation.
struct Run {
  std::string subcommand;
  std::vector<std::string> args;
  json flags = json::object();
  std::vector<std::uint64_t> seeds;
  json inputs = json::array();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& path) {
    inputs.push_back({{"path", path}, {"fnv1a64", hash_to_hex(fnv1a64(read_binary(path)))}});
  }
  void output(const std::string& path) { outputs.push_back(path); }
};

void write_manifests(const Run& run) {
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - run.start).count();
  const json manifest = {{"subcommand", run.subcommand}, {"args", run.args},       {"flags", run.flags},
                         {"seeds", run.seeds},           {"inputs", run.inputs},   {"outputs", run.outputs},
                         {"duration_seconds", seconds}};
  const std::string text = manifest.dump(2) + "\n";
  for (const auto& path : run.outputs) write_atomic(path + ".manifest.json", text);
}

// Shared output flags.
struct OutputFlags {
  std::string out;
  std::string format = "json";
  double display_scale = 1.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--out", out, "write the result here instead of standard output");
    cmd->add_option("--format", format, "json, csv or text")->check(CLI::IsMember({"json", "csv", "text"}));
    cmd->add_option("--display-scale", display_scale, "multiplies scores in text output only");
  }
  void record(Run& run) const {
    run.flags["out"] = out;
    run.flags["format"] = format;
    run.flags["display_scale"] = display_scale;
  }
};

void emit(Run& run, const OutputFlags& flags, const std::string& text, std::ostream& out) {
  if (flags.out.empty()) {
    out << text;
    return;
  }
  write_atomic(flags.out, text);
  run.output(flags.out);
}

struct TrainFlags {
  TrainConfig cfg;

  explicit TrainFlags(TrainConfig base) : cfg(base) {}

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", cfg.seed, "adapter init and data order seed");
    cmd->add_option("--rank", cfg.rank, "adapter rank");
    cmd->add_option("--epochs", cfg.epochs);
    cmd->add_option("--batch", cfg.batch_size);
    cmd->add_option("--lr", cfg.learning_rate, "SGD learning rate");
    cmd->add_option("--init-scale", cfg.init_scale, "standard deviation of the initial b factor");
    cmd->add_flag("--train-head", cfg.train_head, "also train the classification head");
    cmd->add_flag("--full-ft", cfg.full_finetune, "also train the base weights");
  }
  void record(Run& run) const {
    run.flags["seed"] = cfg.seed;
    run.flags["rank"] = cfg.rank;
    run.flags["epochs"] = cfg.epochs;
    run.flags["batch"] = cfg.batch_size;
    run.flags["lr"] = cfg.learning_rate;
    run.flags["init_scale"] = cfg.init_scale;
    run.flags["train_head"] = cfg.train_head;
    run.flags["full_ft"] = cfg.full_finetune;
  }
};

struct ScoreFlags {
  std::string subspace = "right";

  void add(CLI::App* cmd) {
    cmd->add_option("--subspace", subspace, "singular subspace compared: right or left")
        ->check(CLI::IsMember({"right", "left"}));
  }
  GrassmannOptions options() const {
    GrassmannOptions o;
    o.subspace = subspace == "left" ? Subspace::left : Subspace::right;
    return o;
  }
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (flag < 0) throw UsageError("--threads must be positive");
  const char* env = std::getenv("REPMATCH_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const long value = std::strtol(env, &end, 10);
  if (*end != '\0' || value <= 0) throw UsageError(std::string("REPMATCH_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<int>(value);
}

Dataset load_for(const Checkpoint& ckpt, Run& run, const std::string& path) {
  run.input(path);
  Dataset ds = load_jsonl(path, ckpt.dims().classes);
  ds.validate();
  return ds;
}

Checkpoint load_ckpt(Run& run, const std::string& path) {
  run.input(path);
  return load_checkpoint(path);
}

AdapterBundle load_rab(Run& run, const std::string& path) {
  run.input(path);
  return load_bundle(path);
}

Ranking load_ranking(Run& run, const std::string& path) {
  run.input(path);
  try {
    return ranking_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed ranking JSON (" + e.what() + ")");
  }
}

std::vector<OverlapBin> parse_bins(const std::string& text) {
  std::vector<OverlapBin> bins;
  std::stringstream all(text);
  std::string item;
  while (std::getline(all, item, ',')) {
    std::stringstream parts(item);
    std::string name, lo, hi;
    if (!std::getline(parts, name, ':') || !std::getline(parts, lo, ':') || !std::getline(parts, hi, ':') ||
        name.empty()) {
      throw UsageError("bins must look like name:lo:hi[,name:lo:hi...], got '" + item + "'");
    }
    try {
      bins.push_back({name, std::stod(lo), std::stod(hi)});
    } catch (const std::exception&) {
      throw UsageError("bin '" + item + "' has a non-numeric bound");
    }
  }
  if (bins.empty()) throw UsageError("no bins given");
  return bins;
}

std::string render_value(const json& obj, const OutputFlags& flags) {
  const OutputFormat format = parse_format(flags.format);
  if (format == OutputFormat::json) return obj.dump(2) + "\n";
  std::string header, row, text;
  for (const auto& [k, v] : obj.items()) {
    const std::string value = v.is_number_float() ? format_double(v.get<double>()) : (v.is_string() ? v.get<std::string>() : v.dump());
    header += (header.empty() ? "" : ",") + k;
    row += (row.empty() ? "" : ",") + value;
    text += k + "  " + value + "\n";
  }
  return format == OutputFormat::csv ? header + "\n" + row + "\n" : text;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RepMatch: compare fine-tuned low-rank adapters by their singular subspaces", "repmatch"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (overrides REPMATCH_THREADS)");

  Run run;
  run.args = args;
  std::function<void()> action;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset as JSONL");
  std::string kind;
  OutputFlags synth_out;
  std::uint64_t synth_seed = 0, variant_seed = 1;
  std::size_t n = 400, d = 32, classes = 2, grades = 5;
  double shift = 0.0, lo = 0.0, hi = 1.0, flip = 0.0;
  FamilyOptions family;
  std::string rule = "correlated";
  synth->add_option("kind", kind, "family, overlap, overlap-grades or generic")
      ->required()
      ->check(CLI::IsMember({"family", "overlap", "overlap-grades", "generic"}));
  synth->add_option("--seed", synth_seed, "family seed (family) or generator seed (overlap)");
  synth->add_option("--variant-seed", variant_seed, "instance noise and mean-shift seed (family)");
  synth->add_option("--n", n, "instances");
  synth->add_option("--d", d, "feature length");
  synth->add_option("--classes", classes);
  synth->add_option("--shift", shift, "variant mean shift (family)");
  synth->add_option("--mean-scale", family.mean_scale);
  synth->add_option("--noise", family.noise);
  synth->add_option("--outlier-fraction", family.outlier_fraction);
  synth->add_option("--outlier-scale", family.outlier_scale);
  synth->add_option("--lo", lo, "lowest overlap fraction (overlap)");
  synth->add_option("--hi", hi, "highest overlap fraction (overlap)");
  synth->add_option("--rule", rule, "correlated or anti (overlap)")->check(CLI::IsMember({"correlated", "anti"}));
  synth->add_option("--flip", flip, "label flip probability (overlap)");
  synth->add_option("--grades", grades, "label grades (overlap-grades)");
  synth->add_option("--out", synth_out.out, "write the JSONL here instead of standard output");
  synth->callback([&] {
    action = [&] {
      run.flags = {{"kind", kind}, {"seed", synth_seed}, {"variant_seed", variant_seed}, {"n", n}, {"d", d},
                   {"classes", classes}, {"shift", shift}, {"mean_scale", family.mean_scale},
                   {"noise", family.noise}, {"outlier_fraction", family.outlier_fraction},
                   {"outlier_scale", family.outlier_scale}, {"lo", lo}, {"hi", hi}, {"rule", rule},
                   {"flip", flip}, {"grades", grades}, {"out", synth_out.out}};
      run.seeds = {synth_seed, variant_seed};
      Dataset ds;
      if (kind == "family") {
        ds = gen_family(synth_seed, variant_seed, n, d, classes, shift, family);
      } else if (kind == "overlap") {
        ds = gen_overlap(synth_seed, n, d, lo, hi, rule == "anti" ? LabelRule::anti : LabelRule::correlated,
                         OverlapOptions{flip});
      } else if (kind == "overlap-grades") {
        ds = overlap_grade_task(synth_seed, n, d, grades);
      } else {
        ds = default_generic_task(d, classes);
      }
      ds.validate();
      emit(run, synth_out, to_jsonl(ds), out);
    };
  });

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "train and freeze a base network, write a checkpoint");
  std::string task_path, ckpt_out;
  std::uint64_t pre_seed = 0;
  PretrainConfig pcfg;
  std::size_t generic_classes = 4;
  pre->add_option("--task", task_path, "generic task JSONL (default: built-in generic task)");
  pre->add_option("--generic-classes", generic_classes, "classes of the built-in generic task");
  pre->add_option("--seed", pre_seed);
  pre->add_option("--classes", pcfg.classes, "outputs of the downstream head");
  pre->add_option("--depth", pcfg.depth);
  pre->add_option("--head-init-scale", pcfg.head_init_scale);
  pre->add_option("--max-epochs", pcfg.max_epochs);
  pre->add_option("--lr", pcfg.learning_rate);
  pre->add_option("--out", ckpt_out, "checkpoint path")->required();
  pre->callback([&] {
    action = [&] {
      run.flags = {{"task", task_path}, {"generic_classes", generic_classes}, {"seed", pre_seed},
                   {"classes", pcfg.classes}, {"depth", pcfg.depth}, {"head_init_scale", pcfg.head_init_scale},
                   {"max_epochs", pcfg.max_epochs}, {"lr", pcfg.learning_rate}, {"out", ckpt_out}};
      run.seeds = {pre_seed};
      Dataset task;
      if (task_path.empty()) {
        task = default_generic_task(32, generic_classes);
      } else {
        run.input(task_path);
        task = load_jsonl(task_path);
      }
      const Checkpoint ckpt = pretrain(pre_seed, task, pcfg);
      save_checkpoint(ckpt, ckpt_out);
      run.output(ckpt_out);
      out << json{{"model_tag", ckpt.model_tag()}, {"hash", hash_to_hex(ckpt.hash())}}.dump(2) << "\n";
    };
  });

  // finetune
  auto* ft = app.add_subcommand("finetune", "train fresh adapters on a dataset, write the bundle");
  std::string ft_ckpt, ft_data, ft_out, ft_test;
  TrainFlags ft_train(TrainConfig::dataset_level());
  ft->add_option("checkpoint", ft_ckpt)->required();
  ft->add_option("data", ft_data)->required();
  ft->add_option("--out", ft_out, "bundle path")->required();
  ft->add_option("--test", ft_test, "report accuracy on this JSONL after training");
  ft_train.add(ft);
  ft->callback([&] {
    action = [&] {
      ft_train.record(run);
      run.flags["out"] = ft_out;
      run.flags["test"] = ft_test;
      run.seeds = {ft_train.cfg.seed};
      const Checkpoint ckpt = load_ckpt(run, ft_ckpt);
      const Dataset data = load_for(ckpt, run, ft_data);
      const FinetuneResult result = finetune(ckpt, data, ft_train.cfg);
      save_bundle(result.bundle, ft_out);
      run.output(ft_out);
      json summary = {{"bundle_hash", hash_to_hex(content_hash(result.bundle))},
                      {"initial_loss", result.initial_loss},
                      {"final_loss", result.final_loss},
                      {"degenerate", result.degenerate}};
      if (!ft_test.empty()) summary["accuracy"] = evaluate(result.net, load_for(ckpt, run, ft_test));
      out << summary.dump(2) << "\n";
    };
  });

  // compare
  auto* cmp = app.add_subcommand("compare", "RepMatch of two bundles, or of two datasets with --checkpoint");
  std::string cmp_a, cmp_b, cmp_ckpt, grid_dir;
  bool pgm = false;
  OutputFlags cmp_out;
  ScoreFlags cmp_score;
  TrainFlags cmp_train(TrainConfig::dataset_level());
  cmp->add_option("first", cmp_a, "bundle (or dataset with --checkpoint)")->required();
  cmp->add_option("second", cmp_b, "bundle (or dataset with --checkpoint)")->required();
  cmp->add_option("--checkpoint", cmp_ckpt, "fine-tune both datasets from this checkpoint first");
  cmp->add_option("--grid-dir", grid_dir, "write each layer's similarity grid as CSV here");
  cmp->add_flag("--pgm", pgm, "with --grid-dir, also write greyscale PGM heatmaps");
  cmp_out.add(cmp);
  cmp_score.add(cmp);
  cmp_train.add(cmp);
  cmp->callback([&] {
    action = [&] {
      cmp_out.record(run);
      run.flags["subspace"] = cmp_score.subspace;
      run.flags["checkpoint"] = cmp_ckpt;
      run.flags["grid_dir"] = grid_dir;
      run.flags["pgm"] = pgm;
      RepMatchReport report;
      if (cmp_ckpt.empty()) {
        report = model_repmatch(load_rab(run, cmp_a), load_rab(run, cmp_b), cmp_score.options());
      } else {
        cmp_train.record(run);
        run.seeds = {cmp_train.cfg.seed};
        const Checkpoint ckpt = load_ckpt(run, cmp_ckpt);
        report = compare_datasets(ckpt, load_for(ckpt, run, cmp_a), load_for(ckpt, run, cmp_b), cmp_train.cfg,
                                  cmp_score.options());
      }
      if (!grid_dir.empty()) {
        fs::create_directories(grid_dir);
        for (const auto& layer : report.per_layer) {
          const std::string base = (fs::path(grid_dir) / layer.layer_id).string();
          write_atomic(base + ".csv", grid_csv(layer.grid));
          run.output(base + ".csv");
          if (pgm) {
            write_atomic(base + ".pgm", grid_pgm(layer.grid));
            run.output(base + ".pgm");
          }
        }
      }
      emit(run, cmp_out, render(report, parse_format(cmp_out.format), cmp_out.display_scale), out);
    };
  });

  // rank
  auto* rk = app.add_subcommand("rank", "score every instance against a reference bundle");
  std::string rk_ckpt, rk_data, rk_ref;
  OutputFlags rk_out;
  ScoreFlags rk_score;
  TrainFlags rk_train(TrainConfig::instance_level());
  std::size_t instance_steps = RankOptions{}.instance_steps;
  rk->add_option("checkpoint", rk_ckpt)->required();
  rk->add_option("data", rk_data)->required();
  rk->add_option("reference", rk_ref, "bundle trained on the full dataset")->required();
  rk->add_option("--instance-steps", instance_steps, "SGD steps per instance");
  rk_out.add(rk);
  rk_score.add(rk);
  rk_train.add(rk);
  rk->callback([&] {
    action = [&] {
      rk_out.record(run);
      rk_train.record(run);
      run.flags["instance_steps"] = instance_steps;
      run.flags["subspace"] = rk_score.subspace;
      run.seeds = {rk_train.cfg.seed};
      const Checkpoint ckpt = load_ckpt(run, rk_ckpt);
      const Dataset data = load_for(ckpt, run, rk_data);
      RankOptions options;
      options.instance_steps = instance_steps;
      options.grassmann = rk_score.options();
      const Ranking ranking = rank_instances(ckpt, data, load_rab(run, rk_ref), rk_train.cfg, options);
      emit(run, rk_out, render(ranking, parse_format(rk_out.format), rk_out.display_scale), out);
      if (!rk_out.out.empty() && rk_out.format != "json") {
        const std::string sidecar = rk_out.out + ".json";
        write_atomic(sidecar, to_json(ranking).dump(2) + "\n");
        run.output(sidecar);
      }
    };
  });

  // select
  auto* sel = app.add_subcommand("select", "fine-tune on a top or random k-subset and evaluate");
  std::string sel_ckpt, sel_train_path, sel_test_path, sel_ranking;
  std::size_t sel_k = 32;
  std::string strategy = "top";
  std::uint64_t random_seed = 0;
  OutputFlags sel_out;
  TrainFlags sel_train(TrainConfig::dataset_level());
  sel->add_option("checkpoint", sel_ckpt)->required();
  sel->add_option("train", sel_train_path)->required();
  sel->add_option("test", sel_test_path)->required();
  sel->add_option("--ranking", sel_ranking, "ranking JSON (rank --format json, or its .json sidecar)")->required();
  sel->add_option("--k", sel_k, "subset size");
  sel->add_option("--strategy", strategy, "top or random")->check(CLI::IsMember({"top", "random"}));
  sel->add_option("--random-seed", random_seed, "subset draw seed for --strategy random");
  sel_out.add(sel);
  sel_train.add(sel);
  sel->callback([&] {
    action = [&] {
      sel_out.record(run);
      sel_train.record(run);
      run.flags["k"] = sel_k;
      run.flags["strategy"] = strategy;
      run.flags["random_seed"] = random_seed;
      run.seeds = {sel_train.cfg.seed, random_seed};
      const Checkpoint ckpt = load_ckpt(run, sel_ckpt);
      const Dataset train = load_for(ckpt, run, sel_train_path);
      const Dataset test = load_for(ckpt, run, sel_test_path);
      const Selection selection{strategy == "top" ? SelectStrategy::top : SelectStrategy::random, random_seed};
      const ExperimentReport report =
          select_and_eval(ckpt, train, test, load_ranking(run, sel_ranking), sel_k, selection, sel_train.cfg);
      emit(run, sel_out, render(report, parse_format(sel_out.format), sel_out.display_scale), out);
    };
  });

  // sweep-k
  auto* sweep = app.add_subcommand("sweep-k", "top versus random selection over subset sizes and seeds");
  std::string sw_ckpt, sw_train_path, sw_test_path, sw_ranking;
  std::vector<std::size_t> ks{8, 16, 32, 64, 128};
  std::vector<std::uint64_t> sw_seeds{0, 1, 2, 3, 4};
  OutputFlags sw_out;
  TrainFlags sw_train(TrainConfig::dataset_level());
  sweep->add_option("checkpoint", sw_ckpt)->required();
  sweep->add_option("train", sw_train_path)->required();
  sweep->add_option("test", sw_test_path)->required();
  sweep->add_option("--ranking", sw_ranking, "ranking JSON")->required();
  sweep->add_option("--ks", ks, "subset sizes")->delimiter(',');
  sweep->add_option("--seeds", sw_seeds, "training and random-draw seeds")->delimiter(',');
  sw_out.add(sweep);
  sw_train.add(sweep);
  sweep->callback([&] {
    action = [&] {
      sw_out.record(run);
      sw_train.record(run);
      run.flags["ks"] = ks;
      run.flags["seeds"] = sw_seeds;
      run.seeds = sw_seeds;
      const Checkpoint ckpt = load_ckpt(run, sw_ckpt);
      const Dataset train = load_for(ckpt, run, sw_train_path);
      const Dataset test = load_for(ckpt, run, sw_test_path);
      const ExperimentReport report =
          sweep_k(ckpt, train, test, load_ranking(run, sw_ranking), ks, sw_seeds, sw_train.cfg);
      emit(run, sw_out, render(report, parse_format(sw_out.format), sw_out.display_scale), out);
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "accuracy of checkpoint + bundle (checkpoint head) on a dataset");
  std::string ev_ckpt, ev_bundle, ev_data;
  OutputFlags ev_out;
  ev->add_option("checkpoint", ev_ckpt)->required();
  ev->add_option("bundle", ev_bundle)->required();
  ev->add_option("data", ev_data)->required();
  ev_out.add(ev);
  ev->callback([&] {
    action = [&] {
      ev_out.record(run);
      const Checkpoint ckpt = load_ckpt(run, ev_ckpt);
      const AdapterBundle bundle = load_rab(run, ev_bundle);
      const double accuracy = evaluate(ckpt, bundle, ckpt.head_init(), load_for(ckpt, run, ev_data));
      emit(run, ev_out, render_value({{"accuracy", accuracy}}, ev_out), out);
    };
  });

  // baseline-cls
  auto* cls = app.add_subcommand("baseline-cls", "percentage of representation cosines above a threshold");
  std::string cls_a, cls_b;
  double threshold = 0.9;
  std::size_t cap = 10000;
  std::uint64_t cls_seed = 0;
  OutputFlags cls_out;
  cls->add_option("first", cls_a, "JSONL of representation vectors")->required();
  cls->add_option("second", cls_b, "JSONL of representation vectors")->required();
  cls->add_option("--threshold", threshold, "cosine threshold in (0, 1)");
  cls->add_option("--cap", cap, "subsample each side to at most this many vectors");
  cls->add_option("--seed", cls_seed, "subsampling seed");
  cls_out.add(cls);
  cls->callback([&] {
    action = [&] {
      cls_out.record(run);
      run.flags["threshold"] = threshold;
      run.flags["cap"] = cap;
      run.flags["seed"] = cls_seed;
      run.seeds = {cls_seed};
      run.input(cls_a);
      run.input(cls_b);
      auto vectors = [](const Dataset& ds) {
        std::vector<std::vector<double>> v;
        for (const auto& inst : ds.instances) v.push_back(inst.features);
        return v;
      };
      const Dataset a = load_jsonl(cls_a);
      const Dataset b = load_jsonl(cls_b);
      if (a.empty() || b.empty()) throw DataError("baseline-cls: empty representation file");
      RunOptions options;
      const double pct = cls_baseline(vectors(a), vectors(b), threshold, cap, cls_seed, options);
      emit(run, cls_out,
           render_value({{"percentage", pct}, {"threshold", threshold}, {"cap", cap}, {"n_first", a.size()},
                         {"n_second", b.size()}},
                        cls_out),
           out);
    };
  });

  // shuffle-baseline
  auto* shuf = app.add_subcommand("shuffle-baseline", "RepMatch of a bundle against its entry-shuffled control");
  std::string shuf_in, shuf_bundle_out;
  std::uint64_t shuf_seed = 0;
  OutputFlags shuf_out;
  ScoreFlags shuf_score;
  shuf->add_option("bundle", shuf_in)->required();
  shuf->add_option("--seed", shuf_seed, "shuffle seed");
  shuf->add_option("--bundle-out", shuf_bundle_out, "also write the shuffled bundle");
  shuf_out.add(shuf);
  shuf_score.add(shuf);
  shuf->callback([&] {
    action = [&] {
      shuf_out.record(run);
      run.flags["seed"] = shuf_seed;
      run.flags["bundle_out"] = shuf_bundle_out;
      run.flags["subspace"] = shuf_score.subspace;
      run.seeds = {shuf_seed};
      const AdapterBundle bundle = load_rab(run, shuf_in);
      const AdapterBundle shuffled = shuffle_entries(bundle, shuf_seed);
      if (!shuf_bundle_out.empty()) {
        save_bundle(shuffled, shuf_bundle_out);
        run.output(shuf_bundle_out);
      }
      const RepMatchReport report = model_repmatch(bundle, shuffled, shuf_score.options());
      emit(run, shuf_out, render(report, parse_format(shuf_out.format), shuf_out.display_scale), out);
    };
  });

  // probe-overlap
  auto* probe = app.add_subcommand("probe-overlap", "RepMatch of overlap-bin subsets to a challenge-trained bundle");
  std::string pr_ckpt, pr_train, pr_challenge, bins_text = "full:1:1,mid:0.6:0.8,no:0:0";
  ProbeOptions probe_options;
  OutputFlags pr_out;
  ScoreFlags pr_score;
  TrainFlags pr_train_flags(TrainConfig::dataset_level());
  probe->add_option("checkpoint", pr_ckpt)->required();
  probe->add_option("training", pr_train, "training-style JSONL with meta overlap")->required();
  probe->add_option("challenge", pr_challenge, "challenge JSONL")->required();
  probe->add_option("--bins", bins_text, "name:lo:hi,...");
  probe->add_option("--probe-n", probe_options.probe_n, "instances per probe subset");
  probe->add_option("--repeats", probe_options.repeats, "subsets per bin");
  pr_out.add(probe);
  pr_score.add(probe);
  pr_train_flags.add(probe);
  probe->callback([&] {
    action = [&] {
      pr_out.record(run);
      pr_train_flags.record(run);
      run.flags["bins"] = bins_text;
      run.flags["probe_n"] = probe_options.probe_n;
      run.flags["repeats"] = probe_options.repeats;
      run.flags["subspace"] = pr_score.subspace;
      for (std::size_t r = 0; r < probe_options.repeats; ++r) run.seeds.push_back(probe_seed(pr_train_flags.cfg.seed, r));
      const auto bins = parse_bins(bins_text);
      const Checkpoint ckpt = load_ckpt(run, pr_ckpt);
      const Dataset training = load_for(ckpt, run, pr_train);
      const Dataset challenge = load_for(ckpt, run, pr_challenge);
      probe_options.grassmann = pr_score.options();
      const ExperimentReport report =
          overlap_probe(ckpt, training, challenge, bins, pr_train_flags.cfg, probe_options);
      emit(run, pr_out, render(report, parse_format(pr_out.format), pr_out.display_scale), out);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  for (const auto* sub : app.get_subcommands()) run.subcommand = sub->get_name();
  try {
    const int resolved = resolve_threads(threads);
    if (resolved > 0) omp_set_num_threads(resolved);
    if (action) action();
    run.flags["threads"] = resolved;
    write_manifests(run);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace repmatch::cli
