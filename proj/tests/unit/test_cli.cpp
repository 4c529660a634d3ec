#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"
#include "repmatch/adapter.hpp"
#include "repmatch/io.hpp"
#include "scratch_dir.hpp"

using namespace repmatch;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small end-to-end artifacts shared by the tests below.
struct Workspace {
  ScratchDir dir{"cli"};
  std::string ckpt = (dir / "ckpt.rab").string();
  std::string data_a = (dir / "a.jsonl").string();
  std::string data_b = (dir / "b.jsonl").string();
  std::string bundle_a = (dir / "a.rab").string();
  std::string bundle_b = (dir / "b.rab").string();

  Workspace() {
    REQUIRE(run({"synth", "family", "--seed", "100", "--variant-seed", "1", "--n", "80", "--out", data_a}).code == 0);
    REQUIRE(run({"synth", "family", "--seed", "200", "--variant-seed", "3", "--n", "80", "--out", data_b}).code == 0);
    REQUIRE(run({"pretrain", "--seed", "0", "--out", ckpt}).code == 0);
    REQUIRE(run({"finetune", ckpt, data_a, "--epochs", "3", "--out", bundle_a}).code == 0);
    REQUIRE(run({"finetune", ckpt, data_b, "--epochs", "3", "--out", bundle_b}).code == 0);
  }
};

Workspace& workspace() {
  static Workspace ws;
  return ws;
}

}  // namespace

TEST_CASE("compare prints a RepMatch report as JSON") {
  Workspace& ws = workspace();
  const Outcome self = run({"compare", ws.bundle_a, ws.bundle_a, "--format", "json"});
  REQUIRE(self.code == 0);
  const json report = json::parse(self.out);
  CHECK(report.at("model_score").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.at("per_layer").size() == 4);

  const Outcome cross = run({"compare", ws.bundle_a, ws.bundle_b});
  REQUIRE(cross.code == 0);
  CHECK(json::parse(cross.out).at("model_score").get<double>() < 1.0);
}

TEST_CASE("usage errors exit 1 with usage text on standard error") {
  const Outcome unknown = run({"compare", "--no-such-flag", "a", "b"});
  CHECK(unknown.code == cli::kExitUsage);
  CHECK(unknown.out.empty());
  CHECK(unknown.err.find("Usage: repmatch compare") != std::string::npos);
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  const Outcome help = run({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("baseline-cls") != std::string::npos);
}

TEST_CASE("data errors exit 2") {
  Workspace& ws = workspace();
  const Outcome missing = run({"compare", (ws.dir / "nope.rab").string(), ws.bundle_a});
  CHECK(missing.code == cli::kExitData);
  CHECK(missing.err.find("data error") != std::string::npos);
  write_atomic(ws.dir / "bad.rab", std::string("XXXX not a bundle"));
  const Outcome bad = run({"compare", (ws.dir / "bad.rab").string(), ws.bundle_a});
  CHECK(bad.code == cli::kExitData);
  CHECK(bad.err.find("bad magic") != std::string::npos);
  write_atomic(ws.dir / "nan.jsonl", std::string("{\"features\": [NaN], \"label\": 0}\n"));
  CHECK(run({"finetune", ws.ckpt, (ws.dir / "nan.jsonl").string(), "--out", (ws.dir / "x.rab").string()}).code ==
        cli::kExitData);
}

TEST_CASE("numerical failures exit 3") {
  Workspace& ws = workspace();
  AdapterBundle zero = load_bundle(ws.bundle_a);
  for (auto& layer : zero.layers) layer.a = Matrix(layer.a.rows(), layer.a.cols());
  save_bundle(zero, ws.dir / "zero.rab");
  const Outcome r = run({"compare", (ws.dir / "zero.rab").string(), ws.bundle_a});
  CHECK(r.code == cli::kExitNumerical);
  CHECK(r.err.find("hidden.0") != std::string::npos);
}

TEST_CASE("every output gets a manifest and replaying it reproduces the bytes") {
  Workspace& ws = workspace();
  const std::string out = (ws.dir / "cmp.json").string();
  REQUIRE(run({"compare", ws.bundle_a, ws.bundle_b, "--out", out, "--threads", "2"}).code == 0);
  const json manifest = json::parse(read_text(out + ".manifest.json"));
  CHECK(manifest.at("subcommand") == "compare");
  CHECK(manifest.at("outputs") == json::array({out}));
  CHECK(manifest.at("inputs").size() == 2);
  CHECK(manifest.at("inputs")[0].at("fnv1a64").get<std::string>().size() == 16);
  CHECK(manifest.at("flags").at("threads") == 2);
  CHECK(manifest.contains("duration_seconds"));
  const std::string first = read_text(out);
  std::filesystem::remove(out);
  REQUIRE(run(manifest.at("args").get<std::vector<std::string>>()).code == 0);
  CHECK(read_text(out) == first);

  const std::string bundle_manifest = ws.bundle_a + ".manifest.json";
  const json ft = json::parse(read_text(bundle_manifest));
  CHECK(ft.at("subcommand") == "finetune");
  CHECK(ft.at("seeds") == json::array({0}));
  const std::string bundle_bytes = read_text(ws.bundle_a);
  const std::string replay = (ws.dir / "replay.rab").string();
  auto args = ft.at("args").get<std::vector<std::string>>();
  for (auto& a : args)
    if (a == ws.bundle_a) a = replay;
  REQUIRE(run(args).code == 0);
  CHECK(read_text(replay) == bundle_bytes);
}

TEST_CASE("thread flag wins over the environment") {
  Workspace& ws = workspace();
  const std::string out = (ws.dir / "threads.json").string();
  ::setenv("REPMATCH_THREADS", "3", 1);
  REQUIRE(run({"compare", ws.bundle_a, ws.bundle_a, "--out", out}).code == 0);
  CHECK(json::parse(read_text(out + ".manifest.json")).at("flags").at("threads") == 3);
  REQUIRE(run({"compare", ws.bundle_a, ws.bundle_a, "--out", out, "--threads", "1"}).code == 0);
  CHECK(json::parse(read_text(out + ".manifest.json")).at("flags").at("threads") == 1);
  ::setenv("REPMATCH_THREADS", "many", 1);
  CHECK(run({"compare", ws.bundle_a, ws.bundle_a}).code == cli::kExitUsage);
  ::unsetenv("REPMATCH_THREADS");
}

TEST_CASE("display scale only changes rendered text") {
  Workspace& ws = workspace();
  const Outcome raw = run({"compare", ws.bundle_a, ws.bundle_a, "--display-scale", "100"});
  CHECK(json::parse(raw.out).at("model_score").get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(run({"compare", ws.bundle_a, ws.bundle_a, "--format", "csv", "--display-scale", "100"}).out ==
        run({"compare", ws.bundle_a, ws.bundle_a, "--format", "csv"}).out);
  const Outcome text = run({"compare", ws.bundle_a, ws.bundle_a, "--format", "text", "--display-scale", "100"});
  CHECK(text.out.find("model  100.0000") != std::string::npos);
}

TEST_CASE("compare writes similarity grids") {
  Workspace& ws = workspace();
  const std::string grids = (ws.dir / "grids").string();
  REQUIRE(run({"compare", ws.bundle_a, ws.bundle_b, "--grid-dir", grids, "--pgm"}).code == 0);
  CHECK(read_text(ws.dir / "grids" / "hidden.0.csv").starts_with("i\\j,1\n1,"));
  CHECK(read_text(ws.dir / "grids" / "hidden.3.pgm").starts_with("P5\n1 1\n255\n"));
}

TEST_CASE("rank, select, sweep-k and eval run end to end") {
  Workspace& ws = workspace();
  const std::string ranking = (ws.dir / "ranking.csv").string();
  REQUIRE(run({"rank", ws.ckpt, ws.data_a, ws.bundle_a, "--format", "csv", "--out", ranking, "--instance-steps", "3"})
              .code == 0);
  CHECK(read_text(ranking).starts_with("rank,index,score,degenerate\n"));
  const json sidecar = json::parse(read_text(ranking + ".json"));
  CHECK(sidecar.at("entries").size() == 80);
  CHECK(sidecar.at("config").at("instance_steps") == 3);

  const Outcome sel = run({"select", ws.ckpt, ws.data_a, ws.data_b, "--ranking", ranking + ".json", "--k", "8",
                           "--strategy", "random", "--random-seed", "5", "--epochs", "2"});
  REQUIRE(sel.code == 0);
  const json sel_json = json::parse(sel.out);
  CHECK(sel_json.at("rows")[0].at("k") == 8.0);
  CHECK(sel_json.at("rows")[0].at("seed") == 5);

  const Outcome sweep = run({"sweep-k", ws.ckpt, ws.data_a, ws.data_b, "--ranking", ranking + ".json", "--ks", "4,8",
                             "--seeds", "1,2", "--epochs", "2", "--format", "csv"});
  REQUIRE(sweep.code == 0);
  std::size_t lines = 0;
  for (char c : sweep.out) lines += c == '\n';
  CHECK(lines == 9);

  const Outcome ev = run({"eval", ws.ckpt, ws.bundle_a, ws.data_a});
  REQUIRE(ev.code == 0);
  const double acc = json::parse(ev.out).at("accuracy").get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(run({"select", ws.ckpt, ws.data_a, ws.data_b, "--ranking", ranking + ".json", "--k", "81"}).code ==
        cli::kExitData);
}

TEST_CASE("shuffle baseline scores far below self-similarity") {
  Workspace& ws = workspace();
  const std::string shuffled = (ws.dir / "shuffled.rab").string();
  const Outcome r = run({"shuffle-baseline", ws.bundle_a, "--seed", "4", "--bundle-out", shuffled});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out).at("model_score").get<double>() < 0.5);
  CHECK(std::filesystem::exists(shuffled + ".manifest.json"));
  CHECK_NOTHROW(load_bundle(shuffled));
}

TEST_CASE("synth and probe-overlap") {
  Workspace& ws = workspace();
  const std::string training = (ws.dir / "training.jsonl").string();
  const std::string challenge = (ws.dir / "challenge.jsonl").string();
  REQUIRE(run({"synth", "overlap", "--seed", "3", "--n", "200", "--lo", "0", "--hi", "1", "--flip", "0.3", "--out", training}).code == 0);
  REQUIRE(run({"synth", "overlap", "--seed", "4", "--n", "60", "--rule", "anti", "--out", challenge}).code == 0);
  const Outcome probe = run({"probe-overlap", ws.ckpt, training, challenge, "--bins", "low:0:0.5,high:0.5:1",
                             "--probe-n", "10", "--repeats", "2", "--epochs", "2"});
  REQUIRE(probe.code == 0);
  const json rows = json::parse(probe.out).at("rows");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("bin") == "low");
  CHECK(rows[1].contains("repmatch_1"));
  CHECK(run({"probe-overlap", ws.ckpt, training, challenge, "--bins", "broken"}).code == cli::kExitUsage);

  const Outcome synth = run({"synth", "overlap-grades", "--seed", "1", "--n", "5", "--grades", "3"});
  REQUIRE(synth.code == 0);
  std::size_t lines = 0;
  for (char c : synth.out) lines += c == '\n';
  CHECK(lines == 5);
}
