#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include <json.hpp>

#include "subkam/config.hpp"
#include "subkam/run.hpp"

using namespace subkam;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("subkam_test_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

struct ThreadsGuard {
  explicit ThreadsGuard(const char* n) { ::setenv("SUBKAM_THREADS", n, 1); }
  ~ThreadsGuard() { ::unsetenv("SUBKAM_THREADS"); }
};

// Coarse enough to keep each run well under a second.
const char* kSmallSolve =
    "instance = euclidean-1d\n"
    "task = solve\n"
    "[hj]\n"
    "resolution = 81, dt = 0.05\n";

const char* kSmallBarrier =
    "instance = euclidean-1d\n"
    "task = barrier\n"
    "seed = 5\n"
    "[barrier]\n"
    "n_triples = 3, n_horizons = 3, t_min = 4, t_max = 8\n"
    "[action]\n"
    "n_steps = 12, n_restarts = 1\n";

}  // namespace

TEST_CASE("critical on euclidean-1d reports three estimates and the oracle") {
  auto c = parse_config("instance = euclidean-1d, task = critical\n[critical]\nlp_n_x = 21, 41\nlp_n_u = 21, 21\n");
  c.out_dir = scratch("critical").string();
  CHECK(run(c) == kExitOk);
  const auto m = manifest(c.out_dir);
  CHECK(m["status"] == "ok");
  const auto& r = m["results"]["critical"];
  for (const char* k : {"time_average", "abel", "closed_measure_lp", "oracle"}) CHECK(r.contains(k));
  CHECK(m.contains("versions"));
  CHECK(m.contains("wall_times_s"));
  CHECK(m.contains("settings"));
  for (const char* f : {"time_average.csv", "abel.csv", "lp.csv", "mu_star.csv", "config.effective"})
    CHECK(fs::exists(fs::path(c.out_dir) / f));
  CHECK(slurp(fs::path(c.out_dir) / "config.effective") == echo_config(c));
}

TEST_CASE("output path that is a regular file gives status 1") {
  const fs::path base = scratch("as_file");
  fs::create_directories(base);
  const fs::path file = base / "occupied";
  std::ofstream(file) << "x";
  auto c = parse_config("instance = euclidean-1d, task = aubry\n");
  c.out_dir = file.string();
  CHECK(run(c) == kExitError);
}

TEST_CASE("read-only output directory gives status 1") {
  if (::geteuid() == 0) return;  // root ignores permission bits
  const fs::path dir = scratch("readonly");
  fs::create_directories(dir);
  fs::permissions(dir, fs::perms::owner_read | fs::perms::owner_exec);
  auto c = parse_config("instance = euclidean-1d, task = aubry\n");
  c.out_dir = dir.string();
  CHECK(run(c) == kExitError);
  fs::permissions(dir, fs::perms::owner_all);
}

TEST_CASE("module errors are serialized into the manifest") {
  auto c = parse_config("instance = euclidean-1d, task = critical\n[critical]\nx = 7\n");
  c.out_dir = scratch("module_error").string();
  CHECK(run(c) == kExitError);
  const auto m = manifest(c.out_dir);
  CHECK(m["status"] == "error");
  CHECK(m["error"]["kind"].get<std::string>().size() > 0);
  CHECK(m["error"]["message"].get<std::string>().size() > 0);
}

TEST_CASE("non-converged fixed point exits with 2") {
  auto c = parse_config(std::string(kSmallSolve) + "max_iters = 50\nc_offset = 0.1\n");
  c.out_dir = scratch("flagged").string();
  CHECK(run(c) == kExitFlagged);
  const auto m = manifest(c.out_dir);
  CHECK(m["status"] == "flagged");
  CHECK(m["results"]["solve"]["converged"] == false);
}

TEST_CASE("outputs are identical across repeated runs and thread counts") {
  for (const char* text : {kSmallSolve, kSmallBarrier}) {
    auto c = parse_config(text);
    const std::string csv = c.task == "solve" ? "chi.csv" : "barrier.csv";
    std::string reference;
    for (const char* threads : {"1", "1", "4"}) {
      ThreadsGuard guard(threads);
      c.out_dir = scratch(std::string("det_") + threads).string();
      REQUIRE(run(c) == kExitOk);
      const auto content = slurp(fs::path(c.out_dir) / csv);
      CHECK(!content.empty());
      if (reference.empty()) reference = content;
      else CHECK(content == reference);
    }
  }
}

TEST_CASE("seed changes the barrier sample") {
  auto c = parse_config(kSmallBarrier);
  c.out_dir = scratch("seed_a").string();
  REQUIRE(run(c) == kExitOk);
  const auto a = slurp(fs::path(c.out_dir) / "barrier.csv");
  c.seed = 6;
  c.out_dir = scratch("seed_b").string();
  REQUIRE(run(c) == kExitOk);
  CHECK(slurp(fs::path(c.out_dir) / "barrier.csv") != a);
}

TEST_CASE("command line driver") {
  const fs::path dir = scratch("driver");
  fs::create_directories(dir);
  const fs::path cfg = dir / "run.cfg";
  std::ofstream(cfg) << kSmallSolve;
  const std::string exe = SUBKAM_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  CHECK(status(exe + " --config " + cfg.string() + " --out " + (dir / "o1").string()) == 0);
  CHECK(manifest(dir / "o1")["task"] == "solve");
  CHECK(status(exe + " --config " + cfg.string() + " --task check-assumptions --seed 3 --out " + (dir / "o2").string()) ==
        0);
  const auto m = manifest(dir / "o2");
  CHECK(m["task"] == "check-assumptions");
  CHECK(m["seed"] == 3);
  CHECK(status(exe + " --config " + cfg.string() + " --task nonsense") == 1);
  CHECK(status(exe + " --config " + (dir / "missing.cfg").string()) == 1);
  CHECK(status(exe) == 1);
  std::ofstream(dir / "bad.cfg") << "instance = euclidean-1d\ngridd_n = 3\n";
  CHECK(status(exe + " --config " + (dir / "bad.cfg").string()) == 1);
}
