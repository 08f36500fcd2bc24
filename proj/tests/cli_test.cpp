#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ngf/train.hpp"

using namespace ngf;
namespace fs = std::filesystem;

namespace {

const std::string kCli = NGF_CLI_PATH;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ngf_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int exit_code = 0;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path log = scratch / "cli_output.txt";
  const std::string cmd = kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.image_size = 8;
  c.train_views = 2;
  c.heldout_views = 2;
  c.rays_per_batch = 32;
  c.samples_per_ray = 8;
  c.steps = 5;
  c.metric_cadence = 2;
  c.field_hidden = {16, 16};
  c.head_hidden = {16};
  c.gauge_hidden = {16};
  c.grid_resolutions = {4};
  c.codebook_layers = 1;
  c.codebook_entries = 8;
  c.codebook_dim = 8;
  c.prior_samples = 4;
  c.reg_points = 32;
  c.hash_table_size = 64;
  return c;
}

std::string write_config(const fs::path& dir, const TrainConfig& cfg) {
  const fs::path path = dir / "config.json";
  std::ofstream out(path);
  out << cfg.to_json();
  return path.string();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

char hex_digit(std::uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

fs::path run_dir(const fs::path& out_root, const std::string& prefix, std::uint64_t hash) {
  std::string hex(16, '0');
  for (int i = 15; i >= 0; --i, hash >>= 4) hex[static_cast<std::size_t>(i)] = hex_digit(hash);
  return out_root / (prefix + "-" + hex);
}

}  // namespace

TEST_CASE("train refuses a missing config and names the path") {
  const fs::path dir = fresh_dir("missing_config");
  const std::string bogus = (dir / "nope.json").string();
  const RunResult res = run_cli("train --config " + bogus, dir);
  CHECK(res.exit_code != 0);
  CHECK(res.output.find("nope.json") != std::string::npos);
}

TEST_CASE("train writes config, checkpoint, metrics, and previews") {
  const fs::path dir = fresh_dir("train_artifacts");
  TrainConfig cfg = tiny_config();
  const std::string config = write_config(dir, cfg);
  const fs::path out = dir / "runs";
  const RunResult res =
      run_cli("train --config " + config + " --out " + out.string(), dir);
  REQUIRE(res.exit_code == 0);

  const fs::path run = run_dir(out, "run", cfg.hash());
  CHECK(fs::exists(run / "config.json"));
  CHECK(fs::exists(run / "checkpoint.ngf"));
  CHECK(fs::exists(run / "metrics.csv"));
  CHECK(fs::exists(run / "preview_0.ppm"));
  CHECK(read_file(run / "metrics.csv").rfind("step,loss,psnr,occupancy,utilization\n", 0) == 0);
  CHECK(TrainConfig::from_json(read_file(run / "config.json")).hash() == cfg.hash());
}

TEST_CASE("overrides change the effective config") {
  const fs::path dir = fresh_dir("override");
  TrainConfig cfg = tiny_config();
  const std::string config = write_config(dir, cfg);
  const fs::path out = dir / "runs";
  const RunResult res = run_cli(
      "train --config " + config + " --override steps=0 --out " + out.string(), dir);
  REQUIRE(res.exit_code == 0);

  TrainConfig effective = cfg;
  effective.apply_override("steps", "0");
  const fs::path run = run_dir(out, "run", effective.hash());
  REQUIRE(fs::exists(run / "metrics.csv"));
  CHECK(read_file(run / "metrics.csv") == "step,loss,psnr,occupancy,utilization\n");
}

TEST_CASE("the same config and seed reproduce metrics byte for byte") {
  const fs::path dir = fresh_dir("determinism");
  TrainConfig cfg = tiny_config();
  const std::string config = write_config(dir, cfg);
  const fs::path out_a = dir / "a", out_b = dir / "b";
  REQUIRE(run_cli("train --config " + config + " --out " + out_a.string(), dir).exit_code == 0);
  REQUIRE(run_cli("train --config " + config + " --out " + out_b.string(), dir).exit_code == 0);
  const fs::path run_a = run_dir(out_a, "run", cfg.hash());
  const fs::path run_b = run_dir(out_b, "run", cfg.hash());
  const std::string metrics = read_file(run_a / "metrics.csv");
  CHECK(!metrics.empty());
  CHECK(metrics == read_file(run_b / "metrics.csv"));
  CHECK(read_file(run_a / "preview_0.ppm") == read_file(run_b / "preview_0.ppm"));
}

TEST_CASE("eval reports one row per view plus a mean row") {
  const fs::path dir = fresh_dir("eval");
  TrainConfig cfg = tiny_config();
  const std::string config = write_config(dir, cfg);
  const fs::path out = dir / "runs";
  REQUIRE(run_cli("train --config " + config + " --out " + out.string(), dir).exit_code == 0);
  const fs::path ckpt = run_dir(out, "run", cfg.hash()) / "checkpoint.ngf";

  const RunResult res = run_cli("eval " + ckpt.string() + " --out " + out.string(), dir);
  REQUIRE(res.exit_code == 0);
  const std::string csv = read_file(run_dir(out, "eval", cfg.hash()) / "eval.csv");
  std::int64_t lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == cfg.heldout_views + 2);  // header + per-view + mean
  CHECK(csv.find("mean,") != std::string::npos);
}

TEST_CASE("a corrupted checkpoint is reported, not crashed on") {
  const fs::path dir = fresh_dir("corrupt");
  const fs::path bad = dir / "bad.ngf";
  std::ofstream(bad, std::ios::binary) << "not a checkpoint";
  const RunResult res = run_cli("eval " + bad.string(), dir);
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("error:") != std::string::npos);
  CHECK(res.output.find("bad magic") != std::string::npos);
}

TEST_CASE("viz-gauge declines gauges without a 2-D visualization") {
  const fs::path dir = fresh_dir("viz_orth");
  TrainConfig cfg = tiny_config();
  cfg.gauge = GaugeKind::kOrthogonal;
  const std::string config = write_config(dir, cfg);
  const fs::path out = dir / "runs";
  REQUIRE(run_cli("train --config " + config + " --out " + out.string(), dir).exit_code == 0);
  const fs::path ckpt = run_dir(out, "run", cfg.hash()) / "checkpoint.ngf";

  const RunResult res = run_cli("viz-gauge " + ckpt.string() + " --out " + out.string(), dir);
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("orthogonal") != std::string::npos);
}

TEST_CASE("viz-gauge writes the continuous-gauge images") {
  const fs::path dir = fresh_dir("viz_cont");
  TrainConfig cfg = tiny_config();
  const std::string config = write_config(dir, cfg);
  const fs::path out = dir / "runs";
  REQUIRE(run_cli("train --config " + config + " --out " + out.string(), dir).exit_code == 0);
  const fs::path ckpt = run_dir(out, "run", cfg.hash()) / "checkpoint.ngf";

  const RunResult res = run_cli("viz-gauge " + ckpt.string() + " --out " + out.string(), dir);
  REQUIRE(res.exit_code == 0);
  const fs::path viz = run_dir(out, "viz", cfg.hash());
  CHECK(fs::exists(viz / "gauge_splat.ppm"));
  CHECK(fs::exists(viz / "occupancy_heatmap.ppm"));
  CHECK(res.output.find("occupancy:") != std::string::npos);
}

TEST_CASE("unknown experiment presets are rejected with the valid list") {
  const fs::path dir = fresh_dir("bad_experiment");
  const RunResult res = run_cli("experiment no-such-preset --out " + dir.string(), dir);
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("unknown experiment") != std::string::npos);
  CHECK(res.output.find("topk-sweep") != std::string::npos);
}
