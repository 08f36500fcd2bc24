#include "ngf/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ngf {

namespace {

std::string fmt(double v, int prec = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v, int prec = 4) {
  return v ? fmt(*v, prec) : std::string("-");
}

TrainConfig with(const TrainConfig& base, GaugeKind g, RegKind r, double gamma,
                 double epsilon) {
  TrainConfig c = base;
  c.gauge = g;
  c.regularizer = r;
  c.gamma = gamma;
  c.epsilon = epsilon;
  return c;
}

}  // namespace

ExperimentRow run_single(const std::string& label, const TrainConfig& cfg,
                         double psnr_target) {
  Model model = build_model(cfg);
  TrainResult tr = train(model);

  ExperimentRow row;
  row.label = label;
  row.seed = cfg.seed;
  if (!tr.metrics.empty()) row.final_loss = tr.metrics.back().loss;

  const VoxelScene scene = make_toy_scene(cfg.scene, cfg.scene_seed);
  const CameraRig held = heldout_rig(cfg);
  const RenderOptions opts = render_options(cfg);
  const auto refs = render_ground_truth(scene, held, opts);
  row.heldout_psnr = evaluate(model, held, refs, opts).mean;

  if (cfg.gauge == GaugeKind::kContinuous) {
    const SurfaceSamples surf = collect_surface_samples(model, 4096);
    row.occupancy = occupancy_metric(model.cont_gauge, surf.points, surf.weights);
  } else if (cfg.gauge == GaugeKind::kDiscrete) {
    row.utilization = utilization_metric(model.disc_gauge);
  }

  if (psnr_target > 0.0) {
    for (const auto& m : tr.metrics)
      if (m.psnr >= psnr_target) {
        row.steps_to_target = m.step;
        break;
      }
  }
  return row;
}

std::vector<std::string> experiment_names() {
  return {"collapse-continuous", "collapse-discrete",    "reg-compare",
          "predefined-vs-learned", "topk-sweep",         "weight-sweep",
          "infoinv-gain"};
}

ExperimentReport run_experiment(const std::string& name, const TrainConfig& base,
                                std::uint64_t base_seed, int num_seeds) {
  std::vector<std::pair<std::string, TrainConfig>> variants;
  double psnr_target = 0.0;

  if (name == "collapse-continuous") {
    variants.emplace_back("baseline", with(base, GaugeKind::kContinuous, RegKind::kNone, 0, 0));
    variants.emplace_back("inforeg",
                          with(base, GaugeKind::kContinuous, RegKind::kInfoReg, 1.0, 0.1));
  } else if (name == "collapse-discrete") {
    variants.emplace_back("baseline", with(base, GaugeKind::kDiscrete, RegKind::kNone, 0, 0));
    variants.emplace_back("inforeg",
                          with(base, GaugeKind::kDiscrete, RegKind::kInfoReg, 1.0, 0.1));
  } else if (name == "reg-compare") {
    variants.emplace_back("none", with(base, GaugeKind::kContinuous, RegKind::kNone, 0, 0));
    variants.emplace_back("structural",
                          with(base, GaugeKind::kContinuous, RegKind::kStructural, 1.0, 0.0));
    variants.emplace_back("cycle",
                          with(base, GaugeKind::kContinuous, RegKind::kCycle, 1.0, 0.0));
    variants.emplace_back("inforeg",
                          with(base, GaugeKind::kContinuous, RegKind::kInfoReg, 1.0, 0.1));
  } else if (name == "predefined-vs-learned") {
    variants.emplace_back("orthogonal",
                          with(base, GaugeKind::kOrthogonal, RegKind::kNone, 0, 0));
    variants.emplace_back("hash", with(base, GaugeKind::kHash, RegKind::kNone, 0, 0));
    variants.emplace_back("learned+inforeg",
                          with(base, GaugeKind::kContinuous, RegKind::kInfoReg, 1.0, 0.1));
  } else if (name == "topk-sweep") {
    for (std::int64_t k : {1, 2, 4, 8}) {
      TrainConfig c = with(base, GaugeKind::kDiscrete, RegKind::kInfoReg, 1.0, 0.1);
      c.k = k;
      variants.emplace_back("top" + std::to_string(k), c);
    }
  } else if (name == "weight-sweep") {
    const std::pair<double, double> grid[] = {{0.0, 0.0}, {0.1, 0.01}, {1.0, 0.1}, {10.0, 1.0}};
    for (auto [g, e] : grid) {
      variants.emplace_back("g" + fmt(g, 2) + "_e" + fmt(e, 2),
                            with(base, GaugeKind::kContinuous, RegKind::kInfoReg, g, e));
    }
  } else if (name == "infoinv-gain") {
    psnr_target = 22.0;
    TrainConfig off = with(base, GaugeKind::kInfoInv, RegKind::kNone, 0, 0);
    off.infoinv_modulate = false;
    TrainConfig on = off;
    on.infoinv_modulate = true;
    variants.emplace_back("grid-only", off);
    variants.emplace_back("infoinv", on);
  } else {
    throw std::invalid_argument("run_experiment: unknown experiment '" + name + "'");
  }

  ExperimentReport report;
  report.name = name;
  report.psnr_target = psnr_target;
  for (auto& [label, cfg] : variants)
    for (int s = 0; s < num_seeds; ++s) {
      TrainConfig c = cfg;
      c.seed = base_seed + static_cast<std::uint64_t>(s);
      report.rows.push_back(run_single(label, c, psnr_target));
    }
  return report;
}

std::string ExperimentReport::table() const {
  std::ostringstream os;
  os << "experiment: " << name << "\n";
  os << "label              seed  loss      psnr     occupancy  utilization  steps_to_target\n";
  std::map<std::string, std::pair<double, int>> psnr_by_label;
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-18s %-5llu %-9.5f %-8.3f %-10s %-12s %s\n",
                  r.label.c_str(), static_cast<unsigned long long>(r.seed), r.final_loss,
                  r.heldout_psnr, fmt_opt(r.occupancy).c_str(), fmt_opt(r.utilization).c_str(),
                  r.steps_to_target ? std::to_string(*r.steps_to_target).c_str() : "-");
    os << line;
    auto& acc = psnr_by_label[r.label];
    acc.first += r.heldout_psnr;
    acc.second += 1;
  }
  os << "--\n";
  for (const auto& [label, acc] : psnr_by_label)
    os << "mean psnr " << label << ": " << fmt(acc.first / acc.second, 3) << "\n";
  return os.str();
}

std::string ExperimentReport::csv() const {
  std::ostringstream os;
  os << "experiment,label,seed,loss,psnr,occupancy,utilization,steps_to_target\n";
  for (const auto& r : rows) {
    os << name << "," << r.label << "," << r.seed << "," << fmt(r.final_loss, 8) << ","
       << fmt(r.heldout_psnr, 5) << "," << (r.occupancy ? fmt(*r.occupancy, 6) : "") << ","
       << (r.utilization ? fmt(*r.utilization, 6) : "") << ","
       << (r.steps_to_target ? std::to_string(*r.steps_to_target) : "") << "\n";
  }
  return os.str();
}

}  // namespace ngf
