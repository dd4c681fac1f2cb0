#include "doctest.h"
#include "helpers.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using sobo::testing::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

Result run(const fs::path& work, const std::string& args) {
  const fs::path out = work / "stdout.txt";
  const std::string cmd = std::string("'") + SOBALIGN_PATH + "' " + args + " > '" + out.string() +
                          "' 2> '" + (work / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

/// Every file in `dir` except the wall-clock record, concatenated by name.
std::string run_dir_bytes(const fs::path& dir) {
  std::string all;
  for (const char* name : {"config_echo.txt", "report.txt", "params.prm"}) {
    REQUIRE(fs::exists(dir / name));
    all += std::string(name) + "\n" + slurp(dir / name);
  }
  return all;
}

/// Data config, experiment config and a generated archive under `root`.
struct Workspace {
  TempDir tmp;
  fs::path data_cfg, exp_cfg, data;

  explicit Workspace(const std::string& tag) : tmp(tag) {
    data = tmp.path() / "data";
    data_cfg = tmp.path() / "data.cfg";
    exp_cfg = tmp.path() / "exp.cfg";
    spit(data_cfg, "rows=16\ncols=16\ncount=12\nseed=7\nspectral_slope=1.2\noutput=data\n");
    spit(exp_cfg,
         "dataset=data\nrows=16\ncols=16\nhidden=16\nsteps=20\nbatch=4\nholdout=4\nmonitor=8\n"
         "euler_steps=6\nadversary_steps=15\nadversary_hidden=8\nadversary_states=4\n");
    REQUIRE(run(tmp.path(), "gen-data --config " + q(data_cfg)).code == 0);
  }
  const fs::path& root() const { return tmp.path(); }
};

} // namespace

TEST_CASE("verify prop1 on defaults prints the cosine line and exits 0") {
  TempDir tmp("cli_prop1");
  const Result r = run(tmp.path(), "verify prop1");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("prop1: cosine=0.999", 0) == 0);
  CHECK(r.out.find("prop1: PASS") != std::string::npos);
}

TEST_CASE("exit codes") {
  Workspace ws("cli_codes");
  const fs::path w = ws.root();

  SUBCASE("usage") {
    CHECK(run(w, "").code == 1);
    CHECK(run(w, "no-such-command").code == 1);
    CHECK(run(w, "sft --config " + q(ws.exp_cfg) + " --bogus").code == 1);
    CHECK(run(w, "align --variant sdpo --config " + q(ws.exp_cfg)).code == 1); // missing --policy
  }
  SUBCASE("asdpo without an adversary is a usage error") {
    REQUIRE(run(w, "sft --config " + q(ws.exp_cfg) + " --out " + q(w / "sft")).code == 0);
    const Result r = run(w, "align --variant asdpo --config " + q(ws.exp_cfg) + " --policy " +
                                q(w / "sft" / "params.prm") + " --out " + q(w / "a"));
    CHECK(r.code == 1);
    CHECK(slurp(w / "stderr.txt").find("--adversary") != std::string::npos);
    CHECK_FALSE(fs::exists(w / "a"));
  }
  SUBCASE("io") {
    CHECK(run(w, "eval --policy " + q(w / "missing.prm") + " --data " + q(ws.data)).code == 2);
    CHECK(run(w, "sft --config " + q(w / "missing.cfg")).code == 2);
    CHECK(run(w, "psd --input " + q(w / "nowhere") + " --out " + q(w / "p.csv")).code == 2);
  }
  SUBCASE("validation") {
    spit(w / "bad.cfg", "steps=abc\n");
    CHECK(run(w, "sft --config " + q(w / "bad.cfg")).code == 3);
    spit(w / "unknown.cfg", "stepz=10\n");
    CHECK(run(w, "sft --config " + q(w / "unknown.cfg")).code == 3);
    CHECK(run(w, "verify prop2 --widths 2,x").code == 3);
    CHECK(run(w, "align --variant ppo --config " + q(ws.exp_cfg) + " --policy x").code == 3);
  }
  SUBCASE("verification failure") {
    CHECK(run(w, "verify prop1 --eps -1").code == 3);
    // Width 8 is absent from the sweep, so saturation cannot be shown.
    const Result r = run(w, "verify prop2 --widths 2");
    CHECK(r.code == 4);
    CHECK(r.out.find("[FAIL] capacity_saturated") != std::string::npos);
  }
}

TEST_CASE("every command is byte-deterministic for a fixed seed") {
  Workspace ws("cli_det");
  const fs::path w = ws.root();
  const std::string cfg = " --config " + q(ws.exp_cfg);

  for (const char* tag : {"a", "b"}) {
    const fs::path d = w / tag;
    const std::string data = q(d / "data");
    REQUIRE(run(w, "gen-data --config " + q(ws.data_cfg) + " --out " + data).code == 0);
    REQUIRE(run(w, "sft" + cfg + " --out " + q(d / "sft")).code == 0);
    const std::string pol = " --policy " + q(d / "sft" / "params.prm");
    REQUIRE(run(w, "train-adversary" + cfg + pol + " --out " + q(d / "adv")).code == 0);
    for (const char* v : {"dpo-l2", "sdpo"})
      REQUIRE(run(w, std::string("align --variant ") + v + cfg + pol + " --out " + q(d / v)).code == 0);
    REQUIRE(run(w, "align --variant asdpo" + cfg + pol + " --adversary " +
                       q(d / "adv" / "params.prm") + " --out " + q(d / "asdpo"))
                .code == 0);
    const Result e = run(w, "eval --policy " + q(d / "sdpo" / "params.prm") + " --data " + data);
    REQUIRE(e.code == 0);
    spit(d / "eval.csv", e.out);
    REQUIRE(run(w, "psd --input " + data + " --out " + q(d / "psd.csv")).code == 0);
    const Result s = run(w, "sweep-s --values 0,1.5" + cfg + pol);
    REQUIRE(s.code == 0);
    spit(d / "sweep.csv", s.out);
    const Result v = run(w, "verify prop1 --seed 3");
    REQUIRE(v.code == 0);
    spit(d / "prop1.txt", v.out);
  }

  for (const char* f : {"data/manifest.txt", "eval.csv", "psd.csv", "sweep.csv", "prop1.txt"}) {
    CAPTURE(f);
    const std::string a = slurp(w / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(w / "b" / f));
  }
  for (const auto& entry : fs::directory_iterator(w / "a" / "data")) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(w / "b" / "data" / entry.path().filename()));
  }
  for (const char* run_name : {"sft", "adv", "dpo-l2", "sdpo", "asdpo"}) {
    CAPTURE(run_name);
    CHECK(run_dir_bytes(w / "a" / run_name) == run_dir_bytes(w / "b" / run_name));
  }

  SUBCASE("the seed flag changes the outputs") {
    REQUIRE(run(w, "--seed 43 sft" + cfg + " --out " + q(w / "c")).code == 0);
    CHECK(slurp(w / "c" / "params.prm") != slurp(w / "a" / "sft" / "params.prm"));
  }
}

TEST_CASE("gen-data writes where the config says, relative to the config file") {
  Workspace ws("cli_gen");
  CHECK(fs::exists(ws.data / "manifest.txt"));
  const Result r = run(ws.root(), "psd --input " + q(ws.data) + " --out " + q(ws.root() / "p.csv"));
  CHECK(r.code == 0);
  CHECK(slurp(ws.root() / "p.csv").rfind("radius,power\n", 0) == 0);
}
