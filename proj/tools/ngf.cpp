#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ngf/checkpoint.hpp"
#include "ngf/experiments.hpp"
#include "ngf/image.hpp"
#include "ngf/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_root;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
  bool serial = false;     // runs are always sequential; kept for scripts
  bool timestamp = false;  // append wall-clock time to the run directory name
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* c = cmd->add_option("--config", args.config_path, "training config (JSON)");
  if (config_required) c->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_root, "output root (default $NGF_OUT_DIR or ./runs)");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--override", args.overrides, "config override, key=value (repeatable)");
  cmd->add_flag("--serial", args.serial, "force sequential execution (the default)");
  cmd->add_flag("--timestamp", args.timestamp, "suffix the run directory with a timestamp");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ngf::TrainConfig load_config(const CommonArgs& args) {
  ngf::TrainConfig cfg = args.config_path.empty()
                             ? ngf::TrainConfig{}
                             : ngf::TrainConfig::from_json(read_file(args.config_path));
  for (const std::string& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override '" + ov + "' is not of the form key=value");
    cfg.apply_override(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  return cfg;
}

fs::path make_run_dir(const CommonArgs& args, std::uint64_t config_hash,
                      const std::string& prefix) {
  std::string root = args.out_root;
  if (root.empty()) {
    if (const char* env = std::getenv("NGF_OUT_DIR")) root = env;
    if (root.empty()) root = "runs";
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash));
  std::string name = prefix + "-" + hex;
  if (args.timestamp) {
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    name += "-" + std::to_string(
                      std::chrono::duration_cast<std::chrono::seconds>(now).count());
  }
  fs::path dir = fs::path(root) / name;
  fs::create_directories(dir);
  return dir;
}

ngf::Image to_image(const std::vector<double>& pixels, std::int64_t w, std::int64_t h) {
  ngf::Image img;
  img.width = w;
  img.height = h;
  img.pixels = pixels;
  return img;
}

std::pair<ngf::Model, ngf::CheckpointContents> load_model_from_checkpoint(
    const std::string& ckpt_path, const CommonArgs& args) {
  ngf::CheckpointContents ckpt = ngf::load_checkpoint(ckpt_path);
  std::string config_path = args.config_path;
  if (config_path.empty()) {
    const fs::path sibling = fs::path(ckpt_path).parent_path() / "config.json";
    if (!fs::exists(sibling))
      throw std::runtime_error("no --config given and no config.json next to " + ckpt_path);
    config_path = sibling.string();
  }
  ngf::TrainConfig cfg = ngf::TrainConfig::from_json(read_file(config_path));
  for (const std::string& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override '" + ov + "' is not of the form key=value");
    cfg.apply_override(ov.substr(0, eq), ov.substr(eq + 1));
  }
  ngf::Model model = ngf::build_model(cfg);
  ngf::ParamList params = model.params();
  ngf::restore_params(ckpt, params);
  return {std::move(model), std::move(ckpt)};
}

int cmd_train(const CommonArgs& args) {
  ngf::TrainConfig cfg = load_config(args);
  const fs::path dir = make_run_dir(args, cfg.hash(), "run");
  write_file(dir / "config.json", cfg.to_json());

  ngf::Model model = ngf::build_model(cfg);
  ngf::TrainResult result = ngf::train(model);

  ngf::ParamList params = model.params();
  ngf::save_checkpoint((dir / "checkpoint.ngf").string(), params, cfg.steps, cfg.hash());
  write_file(dir / "metrics.csv", ngf::metrics_to_csv(result.metrics));

  const ngf::CameraRig held = ngf::heldout_rig(cfg);
  const ngf::RenderOptions opts = ngf::render_options(cfg);
  for (std::size_t v = 0; v < std::min<std::size_t>(held.size(), 2); ++v) {
    const auto pixels = ngf::render_view(model, held.camera(v), opts);
    ngf::write_ppm((dir / ("preview_" + std::to_string(v) + ".ppm")).string(),
                   to_image(pixels, held.width, held.height));
  }
  std::cout << "run dir: " << dir.string() << "\n";
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::cout << "final: step=" << last.step << " loss=" << last.loss
              << " psnr=" << last.psnr << "\n";
  }
  if (result.rejected_steps > 0)
    std::cout << "rejected steps (non-finite gradients): " << result.rejected_steps << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir,
             const CommonArgs& args) {
  auto [model, ckpt] = load_model_from_checkpoint(ckpt_path, args);
  const ngf::TrainConfig& cfg = model.cfg;
  ngf::RenderOptions opts = ngf::render_options(cfg);

  ngf::CameraRig rig;
  std::vector<ngf::Image> refs;
  if (!dataset_dir.empty()) {
    ngf::NerfDataset ds = ngf::load_nerf_dataset(dataset_dir);
    rig = ds.rig;
    refs = ds.images;
  } else {
    rig = ngf::heldout_rig(cfg);
    const ngf::VoxelScene scene = ngf::make_toy_scene(cfg.scene, cfg.scene_seed);
    refs = ngf::render_ground_truth(scene, rig, opts);
  }

  const ngf::EvalResult res = ngf::evaluate(model, rig, refs, opts);
  std::ostringstream csv;
  csv << "view,psnr\n";
  for (std::size_t v = 0; v < res.per_view.size(); ++v) {
    std::cout << "view " << v << ": " << res.per_view[v] << " dB\n";
    csv << v << "," << res.per_view[v] << "\n";
  }
  std::cout << "mean: " << res.mean << " dB\n";
  csv << "mean," << res.mean << "\n";

  const fs::path dir = make_run_dir(args, cfg.hash(), "eval");
  write_file(dir / "eval.csv", csv.str());
  std::cout << "wrote " << (dir / "eval.csv").string() << "\n";
  return 0;
}

int cmd_viz_gauge(const std::string& ckpt_path, const CommonArgs& args) {
  auto [model, ckpt] = load_model_from_checkpoint(ckpt_path, args);
  const ngf::TrainConfig& cfg = model.cfg;
  const fs::path dir = make_run_dir(args, cfg.hash(), "viz");

  if (model.gauge_kind == ngf::GaugeKind::kContinuous) {
    const ngf::SurfaceSamples surf = ngf::collect_surface_samples(model, 8192);
    const ngf::Tensor mapped = ngf::continuous_forward(model.cont_gauge, surf.points);

    const std::int64_t R = 128;
    ngf::Image splat;
    splat.width = R;
    splat.height = R;
    splat.pixels.assign(static_cast<std::size_t>(R * R * 3), 0.0);
    std::vector<double> mass(static_cast<std::size_t>(R * R), 0.0);
    for (std::size_t i = 0; i < surf.weights.size(); ++i) {
      const auto px = [&](int a) {
        return std::min<std::int64_t>(
            R - 1, static_cast<std::int64_t>(mapped.value(static_cast<std::int64_t>(i) * 2 + a) *
                                             static_cast<double>(R)));
      };
      const std::size_t cell = static_cast<std::size_t>(px(0) * R + px(1));
      const double w = surf.weights[i];
      mass[cell] += w;
      for (int ch = 0; ch < 3; ++ch) splat.pixels[cell * 3 + ch] += w * surf.colors[i * 3 + ch];
    }
    for (std::size_t c = 0; c < mass.size(); ++c)
      if (mass[c] > 0.0)
        for (int ch = 0; ch < 3; ++ch) splat.pixels[c * 3 + ch] /= mass[c];
    ngf::write_ppm((dir / "gauge_splat.ppm").string(), splat);

    const double peak = *std::max_element(mass.begin(), mass.end());
    ngf::Image heat = splat;
    for (std::size_t c = 0; c < mass.size(); ++c) {
      const double v = peak > 0.0 ? mass[c] / peak : 0.0;
      for (int ch = 0; ch < 3; ++ch) heat.pixels[c * 3 + ch] = v;
    }
    ngf::write_ppm((dir / "occupancy_heatmap.ppm").string(), heat);
    std::cout << "occupancy: "
              << ngf::occupancy_metric(model.cont_gauge, surf.points, surf.weights) << "\n";
  } else if (model.gauge_kind == ngf::GaugeKind::kDiscrete) {
    const std::int64_t N = model.disc_gauge.entries;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(N), 0);
    std::int64_t total = 0;
    for (std::size_t l = 0; l < model.disc_gauge.levels.size(); ++l) {
      const ngf::Tensor logits = model.disc_gauge.level_logits(l);
      for (std::int64_t r = 0; r < logits.dim(0); ++r) {
        std::int64_t best = 0;
        double best_v = logits.value(r * N);
        for (std::int64_t j = 1; j < N; ++j)
          if (logits.value(r * N + j) > best_v) {
            best_v = logits.value(r * N + j);
            best = j;
          }
        ++counts[static_cast<std::size_t>(best)];
        ++total;
      }
    }
    const std::int64_t H = 100;
    const std::int64_t peak = *std::max_element(counts.begin(), counts.end());
    ngf::Image hist;
    hist.width = N;
    hist.height = H;
    hist.pixels.assign(static_cast<std::size_t>(N * H * 3), 1.0);
    for (std::int64_t j = 0; j < N; ++j) {
      const std::int64_t bar =
          peak > 0 ? counts[static_cast<std::size_t>(j)] * H / peak : 0;
      for (std::int64_t y = H - bar; y < H; ++y)
        for (int ch = 0; ch < 3; ++ch)
          hist.pixels[static_cast<std::size_t>((y * N + j) * 3 + ch)] = ch == 2 ? 0.8 : 0.2;
    }
    ngf::write_ppm((dir / "selection_histogram.ppm").string(), hist);
    std::cout << "utilization: " << ngf::utilization_metric(model.disc_gauge) << "\n";
  } else {
    std::cerr << "viz-gauge: gauge kind '" << ngf::to_string(model.gauge_kind)
              << "' has no visualization (continuous or discrete only)\n";
    return 1;
  }
  std::cout << "wrote images under " << dir.string() << "\n";
  return 0;
}

int cmd_experiment(const std::string& name, int num_seeds, const CommonArgs& args) {
  const auto names = ngf::experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::cerr << "unknown experiment '" << name << "'; valid names:";
    for (const auto& n : names) std::cerr << " " << n;
    std::cerr << "\n";
    return 1;
  }
  ngf::TrainConfig base = load_config(args);
  const std::uint64_t base_seed = args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : 1;
  const ngf::ExperimentReport report = ngf::run_experiment(name, base, base_seed, num_seeds);

  std::cout << report.table();
  const fs::path dir = make_run_dir(args, base.hash() ^ ngf::fnv1a_hash(name), "exp");
  write_file(dir / "summary.csv", report.csv());
  write_file(dir / "summary.txt", report.table());
  std::cout << "wrote " << (dir / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neural gauge field training toolkit"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, viz_args, exp_args;
  std::string ckpt_path, viz_ckpt_path, dataset_dir, exp_name;
  int num_seeds = 3;

  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  add_common(train_cmd, train_args, true);

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint (PSNR per view)");
  eval_cmd->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--dataset", dataset_dir, "NeRF-style dataset directory");
  add_common(eval_cmd, eval_args, false);

  auto* viz_cmd = app.add_subcommand("viz-gauge", "visualize a learned gauge");
  viz_cmd->add_option("checkpoint", viz_ckpt_path, "checkpoint file")->required();
  add_common(viz_cmd, viz_args, false);

  auto* exp_cmd = app.add_subcommand("experiment", "run a named comparison preset");
  exp_cmd->add_option("name", exp_name, "preset name")->required();
  exp_cmd->add_option("--seeds", num_seeds, "number of seeds per variant");
  add_common(exp_cmd, exp_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(ckpt_path, dataset_dir, eval_args);
    if (viz_cmd->parsed()) return cmd_viz_gauge(viz_ckpt_path, viz_args);
    if (exp_cmd->parsed()) return cmd_experiment(exp_name, num_seeds, exp_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
