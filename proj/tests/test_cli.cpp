#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "percdepth/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "percdepth");
  std::ostringstream out, err;
  const int code = percdepth::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("percdepth_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

int count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  int n = 0;
  while (std::getline(f, line)) n += !line.empty();
  return n;
}

// Small dataset plus a short training run shared by the eval / infer cases.
const fs::path& trained_run() {
  static const fs::path root = [] {
    const fs::path d = temp_dir("run");
    REQUIRE(run({"--seed", "5", "synth", "--out", (d / "data").string(), "--n-rgb", "8", "--n-depth", "8",
                 "--n-eval", "3", "--size", "32"})
                .code == 0);
    REQUIRE(run({"--seed", "5", "--deterministic", "--log-level", "error", "train", "--data",
                 (d / "data").string(), "--out", (d / "out").string(), "--preset", "synth", "--n-g", "50",
                 "--n-f", "1", "--b", "2", "--size", "32", "--checkpoint-every", "50"})
                .code == 0);
    return d;
  }();
  return root;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"synth"}).code == 2);  // --out is required
  CHECK(run({"synth", "--out", "x", "--bogus"}).code == 2);
  CHECK(run({"--log-level", "loud", "inspect-net"}).code == 2);
  CHECK(run({"eval", "--checkpoint", "/nonexistent.pdgc", "--data", "."}).code == 2);
  const Outcome o = run({"frobnicate"});
  CHECK(o.err.find("percdepth") != std::string::npos);
}

TEST_CASE("synth with the same seed writes byte-identical trees") {
  const fs::path d = temp_dir("synth");
  for (const char* sub : {"a", "b"}) {
    const Outcome o = run({"--seed", "7", "synth", "--out", (d / sub).string(), "--n-rgb", "3", "--n-depth", "3",
                           "--n-eval", "2", "--size", "32"});
    REQUIRE(o.code == 0);
  }
  const auto a = tree(d / "a");
  CHECK(a.size() == 3 + 3 + 2 * 2 + 1);
  CHECK(a.count("dataset.json") == 1);
  CHECK(a == tree(d / "b"));

  CHECK(run({"--seed", "8", "synth", "--out", (d / "c").string(), "--n-rgb", "3", "--n-depth", "3", "--n-eval",
             "2", "--size", "32"})
            .code == 0);
  CHECK(a != tree(d / "c"));
}

TEST_CASE("synth rejects an unknown config key") {
  const fs::path d = temp_dir("synth_cfg");
  std::ofstream(d / "cfg.json") << R"({"synth": {"sizee": 32}})";
  CHECK(run({"synth", "--out", (d / "x").string(), "--config", (d / "cfg.json").string()}).code == 2);
  std::ofstream(d / "broken.json") << R"({"synth": {)";
  CHECK(run({"synth", "--out", (d / "x").string(), "--config", (d / "broken.json").string()}).code == 1);
}

TEST_CASE("train smoke run writes one metrics row per step and a checkpoint") {
  const fs::path& d = trained_run();
  const fs::path out = d / "out";
  CHECK(count_lines(out / "metrics.csv") == 1 + 50);
  CHECK(fs::exists(out / "checkpoints" / "step_50.pdgc"));
  CHECK(fs::exists(out / "config.resolved.json"));
}

TEST_CASE("train with an invalid flag value is a configuration error") {
  const fs::path& d = trained_run();
  CHECK(run({"--log-level", "error", "train", "--data", (d / "data").string(), "--out", (d / "bad").string(),
             "--n-g", "1", "--b", "0"})
            .code == 2);
  CHECK(run({"train", "--data", (d / "missing").string(), "--out", (d / "bad").string()}).code == 1);
}

TEST_CASE("eval and infer on a trained checkpoint") {
  const fs::path& d = trained_run();
  const fs::path ckpt = d / "out" / "checkpoints" / "step_50.pdgc";
  const Outcome e = run({"eval", "--checkpoint", ckpt.string(), "--data", (d / "data").string(), "--out",
                         (d / "report.csv").string(), "--baseline-pool", (d / "data").string()});
  REQUIRE(e.code == 0);
  CHECK(count_lines(d / "report.csv") >= 1 + 3);
  CHECK(e.out.find("constant median") != std::string::npos);

  fs::path rgb;
  for (const auto& f : fs::directory_iterator(d / "data" / "eval" / "rgb")) rgb = f.path();
  const Outcome i = run({"infer", "--checkpoint", ckpt.string(), "--in", rgb.string(), "--out",
                         (d / "pred.pfm").string(), "--preview", (d / "pred.png").string()});
  REQUIRE(i.code == 0);
  const auto depth = percdepth::io::read_pfm(d / "pred.pfm");
  CHECK(depth.c() == 1);
  CHECK(depth.h() == 32);
  CHECK(depth.w() == 32);
  for (auto v : depth.values()) CHECK((v >= -1 && v <= 1));
  CHECK(fs::exists(d / "pred.png"));
}

TEST_CASE("filter writes each stage") {
  const fs::path& d = trained_run();
  fs::path rgb;
  for (const auto& f : fs::directory_iterator(d / "data" / "rgb")) rgb = f.path();
  for (const char* stage : {"gray", "gamma", "psi"}) {
    const fs::path pfm = d / (std::string(stage) + ".pfm");
    REQUIRE(run({"filter", "--in", rgb.string(), "--out", pfm.string(), "--stage", stage}).code == 0);
    const auto t = percdepth::io::read_pfm(pfm);
    CHECK(t.c() == 1);
    CHECK(t.h() == 32);
  }
  CHECK(run({"filter", "--in", rgb.string(), "--out", (d / "psi.png").string()}).code == 0);
  CHECK(run({"filter", "--in", rgb.string(), "--out", (d / "x.pfm").string(), "--stage", "blur"}).code == 2);
}

TEST_CASE("inspect-net prints the layer table and parameter count") {
  const Outcome g = run({"inspect-net", "--net", "generator"});
  REQUIRE(g.code == 0);
  std::istringstream lines(g.out);
  std::string line, last;
  int rows = 0;
  while (std::getline(lines, line)) {
    if (!line.empty()) ++rows, last = line;
  }
  CHECK(rows == 1 + 30 + 1);
  CHECK(last.rfind("parameters: ", 0) == 0);

  const Outcome r = run({"inspect-net", "--net", "res-block", "--stride", "2", "--channels", "128",
                         "--io-channels", "64"});
  REQUIRE(r.code == 0);
  // 3x3 64->128 and 128->128 convolutions, 1x1 64->128 skip, three norms (scale, shift).
  const std::size_t expected = 9 * 64 * 128 + 9 * 128 * 128 + 64 * 128 + 3 * 2 * 128;
  CHECK(r.out.find("parameters: " + std::to_string(expected)) != std::string::npos);
  CHECK(run({"inspect-net", "--net", "transformer"}).code == 2);
}
