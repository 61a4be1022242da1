#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

#ifndef SSRL_CLI_PATH
#error "SSRL_CLI_PATH must point at the command-line binary"
#endif

namespace {

const fs::path kWork = fs::temp_directory_path() / "ssrl_cli_tests";

int run(const std::string& args, bool quiet = true) {
  std::string cmd = std::string(SSRL_CLI_PATH) + " " + args;
  if (quiet) cmd += " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// one shared tiny corpus + checkpoint + stores, built once
struct Fixture {
  fs::path ds = kWork / "ds";
  fs::path ckpt = kWork / "m.ckpt";
  fs::path feats = kWork / "feats";
  fs::path mfcc = kWork / "mfcc";
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    REQUIRE(run("synth-data --out " + q(ds) +
                " --speakers 5 --clips-per-speaker 3 --seconds 0.5 --seed 3") == 0);
    REQUIRE(run("pretrain --data " + q(ds) + " --task Odd --epochs 1 --batch-size 8" +
                " --seed 2 --ckpt " + q(ckpt)) == 0);
    REQUIRE(run("extract --data " + q(ds) + " --ckpt " + q(ckpt) + " --store " +
                q(feats)) == 0);
    REQUIRE(run("extract --data " + q(ds) + " --mfcc --store " + q(mfcc)) == 0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("exit codes: usage and configuration errors return 2") {
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("eval --mode frozen") == 2);                  // missing --store
  CHECK(run("eval --config /does/not/exist.json") == 2);  // missing config file
  CHECK(run("pretrain --data /does/not/exist") == 2);     // missing dataset
  CHECK(run("pretrain --data " + q(fixture().ds) + " --alpha 1.5") == 2);
  CHECK(run("synth-data --video-format gif") == 2);

  fs::path bad = kWork / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK(run("eval --config " + q(bad)) == 2);
  fs::path badtype = kWork / "badtype.json";
  std::ofstream(badtype) << R"({"epochs": "two", "store": "x"})";
  CHECK(run("eval --config " + q(badtype)) == 2);
}

TEST_CASE("synth-data writes a loadable dataset and a versioned report") {
  auto& fx = fixture();
  CHECK(fs::exists(fx.ds / "manifest.jsonl"));
  std::string rep(slurp(fx.ds / "report.json").data(),
                  slurp(fx.ds / "report.json").size());
  CHECK(rep.find("\"code_version\"") != std::string::npos);
  CHECK(rep.find("\"seed\": 3") != std::string::npos);
}

TEST_CASE("pipeline: pretrain/extract/eval/report round trip") {
  auto& fx = fixture();
  CHECK(fs::exists(fx.ckpt));
  CHECK(fs::exists(fx.feats / "index.json"));

  fs::path out = kWork / "eval.json";
  CHECK(run("eval --store " + q(fx.feats) + " --baseline-store " + q(fx.mfcc) +
            " --n-runs 2 --epochs 2 --bgru-hidden 8 --out " + q(out)) == 0);
  std::string rep(slurp(out).data(), slurp(out).size());
  CHECK(rep.find("\"mean\"") != std::string::npos);
  CHECK(rep.find("\"paired_t_test\"") != std::string::npos);
  CHECK(run("report " + q(out)) == 0);
  CHECK(run("report " + q(kWork / "nope.json")) == 2);
}

TEST_CASE("determinism: identical command yields a byte-identical report") {
  auto& fx = fixture();
  fs::path out = kWork / "det.json";
  std::string cmd = "eval --store " + q(fx.feats) +
                    " --epochs 2 --bgru-hidden 8 --seed 9 --out " + q(out);
  REQUIRE(run(cmd) == 0);
  auto first = slurp(out);
  REQUIRE(run(cmd) == 0);  // atomic overwrite of the existing file
  CHECK(slurp(out) == first);
}

TEST_CASE("config file is honored and explicit flags override it") {
  auto& fx = fixture();
  fs::path cfgp = kWork / "cfg.json";
  fs::path out1 = kWork / "cfg_eval.json";
  std::ofstream(cfgp) << R"({"store": ")" << fx.feats.string()
                      << R"(", "epochs": 2, "bgru_hidden": 8, "out": ")"
                      << out1.string() << R"(", "n_runs": 1})";
  REQUIRE(run("eval --config " + q(cfgp)) == 0);
  std::string rep(slurp(out1).data(), slurp(out1).size());
  CHECK(rep.find("\"n_runs\": 1") != std::string::npos);

  fs::path out2 = kWork / "cfg_eval2.json";
  REQUIRE(run("eval --config " + q(cfgp) + " --n-runs 2 --out " + q(out2)) == 0);
  std::string rep2(slurp(out2).data(), slurp(out2).size());
  CHECK(rep2.find("\"n_runs\": 2") != std::string::npos);
}

TEST_CASE("work directory env var anchors relative paths") {
  fs::path wd = kWork / "anchored";
  fs::create_directories(wd);
  std::string cmd = std::string("SSRL_WORK_DIR=") + q(wd) + " " + SSRL_CLI_PATH +
                    " synth-data --out rel_ds --speakers 3 --clips-per-speaker 2"
                    " --seconds 0.5 > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(wd / "rel_ds" / "manifest.jsonl"));
}

TEST_CASE("ablation sweeps emit reports, CSV tables and SVG plots") {
  auto& fx = fixture();
  fs::path dir = kWork / "sweep";
  REQUIRE(run("ablate-noise --data " + q(fx.ds) + " --ckpt " + q(fx.ckpt) +
              " --grid -5 --grid 20 --eval-epochs 2 --bgru-hidden 8 --out " +
              q(dir)) == 0);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "noise.csv"));
  CHECK(fs::exists(dir / "noise.svg"));
  std::string rep(slurp(dir / "report.json").data(), slurp(dir / "report.json").size());
  CHECK(rep.find("\"snr_db\": null") != std::string::npos);  // clean reference row
}
