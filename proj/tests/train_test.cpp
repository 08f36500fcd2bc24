#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ngf/checkpoint.hpp"
#include "ngf/rng.hpp"
#include "ngf/train.hpp"

using namespace ngf;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.image_size = 8;
  c.train_views = 2;
  c.heldout_views = 1;
  c.rays_per_batch = 32;
  c.samples_per_ray = 8;
  c.steps = 10;
  c.lr = 3e-3;
  c.field_hidden = {16, 16};
  c.head_hidden = {16};
  c.gauge_hidden = {16};
  c.grid_resolutions = {4};
  c.codebook_layers = 1;
  c.codebook_entries = 8;
  c.codebook_dim = 8;
  c.metric_cadence = 5;
  c.prior_samples = 4;
  c.reg_points = 32;
  c.hash_table_size = 64;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ngf_train_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// accumulate a chosen gradient into `p` through a tape pass
void push_grad(Tensor& p, const std::vector<double>& g) {
  Tape tape;
  Tape::Scope scope(tape);
  backward(sum(mul(p, Tensor({p.dim(0)}, g))));
}

}  // namespace

TEST_CASE("config serializes to JSON and back unchanged") {
  TrainConfig c = tiny_config();
  c.gauge = GaugeKind::kDiscrete;
  c.regularizer = RegKind::kInfoReg;
  c.gamma = 0.75;
  c.background = {0.1, 0.2, 0.3};
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());
}

TEST_CASE("config hash is stable and sensitive to every field change") {
  TrainConfig a = tiny_config();
  TrainConfig b = tiny_config();
  CHECK(a.hash() == b.hash());
  b.apply_override("steps", "11");
  CHECK(a.hash() != b.hash());
}

TEST_CASE("overrides accept scalars, enums, and lists; unknown keys rejected") {
  TrainConfig c = tiny_config();
  c.apply_override("steps", "25");
  CHECK(c.steps == 25);
  c.apply_override("gauge", "discrete");
  CHECK(c.gauge == GaugeKind::kDiscrete);
  c.apply_override("regularizer", "cycle");
  CHECK(c.regularizer == RegKind::kCycle);
  c.apply_override("grid_resolutions", "[8, 16]");
  CHECK(c.grid_resolutions == std::vector<std::int64_t>{8, 16});
  c.apply_override("lr", "0.01");
  CHECK(c.lr == 0.01);
  CHECK_THROWS_AS(c.apply_override("not_a_key", "1"), std::invalid_argument);
}

TEST_CASE("gauge and regularizer names round trip") {
  for (GaugeKind k : {GaugeKind::kContinuous, GaugeKind::kDiscrete, GaugeKind::kInfoInv,
                      GaugeKind::kOrthogonal, GaugeKind::kHash})
    CHECK(gauge_kind_from_string(to_string(k)) == k);
  for (RegKind k : {RegKind::kNone, RegKind::kInfoReg, RegKind::kCycle, RegKind::kStructural})
    CHECK(reg_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(gauge_kind_from_string("nope"), std::invalid_argument);
  CHECK_THROWS_AS(reg_kind_from_string("nope"), std::invalid_argument);
}

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  Tensor p({2}, {1.0, -2.0}, true);
  AdamOptimizer opt({{"p", p}}, 0.01);
  p.zero_grad();
  CHECK(opt.step());
  CHECK(p.value(0) == 1.0);
  CHECK(p.value(1) == -2.0);
}

TEST_CASE("adam's first step has magnitude close to the learning rate") {
  Tensor p({2}, {1.0, -2.0}, true);
  AdamOptimizer opt({{"p", p}}, 0.01);
  push_grad(p, {2.0, -0.5});
  CHECK(opt.step());
  CHECK(std::abs((1.0 - p.value(0)) - 0.01) <= 1e-6);   // moved against +grad
  CHECK(std::abs((p.value(1) + 2.0) - 0.01) <= 1e-6);   // moved against -grad
}

TEST_CASE("adam rejects a non-finite gradient without touching parameters") {
  // d(1/x)/dx = -1/x^2 overflows at x = 1e-200 while the loss stays finite
  Tensor p({2}, {1e-200, -2.0}, true);
  AdamOptimizer opt({{"p", p}}, 0.01);
  {
    Tape tape;
    Tape::Scope scope(tape);
    backward(sum(div(Tensor({2}, {1.0, 1.0}), p)));
  }
  CHECK(!std::isfinite(p.grad()[0]));
  CHECK_FALSE(opt.step());
  CHECK(opt.rejected_steps() == 1);
  CHECK(p.value(0) == 1e-200);
  CHECK(p.value(1) == -2.0);
  for (double g : p.grad()) CHECK(g == 0.0);  // rejected step still clears grads

  push_grad(p, {1.0, 1.0});
  CHECK(opt.step());
  CHECK(opt.rejected_steps() == 1);
}

TEST_CASE("checkpoint round trip preserves values, step, and config hash") {
  const fs::path dir = fresh_dir("roundtrip");
  const std::string path = (dir / "model.ngf").string();

  TrainConfig cfg = tiny_config();
  Model m1 = build_model(cfg);
  save_checkpoint(path, m1.params(), 7, cfg.hash());

  CheckpointContents ckpt = load_checkpoint(path);
  CHECK(ckpt.step == 7);
  CHECK(ckpt.config_hash == cfg.hash());
  REQUIRE(ckpt.params.size() == m1.params().size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK(ckpt.params[i].first == m1.params()[i].first);
    CHECK(ckpt.params[i].second.values() == m1.params()[i].second.values());
  }

  // restore into a differently seeded model of the same architecture
  cfg.seed = 99;
  Model m2 = build_model(cfg);
  ParamList target = m2.params();
  restore_params(ckpt, target);
  for (std::size_t i = 0; i < target.size(); ++i)
    CHECK(target[i].second.values() == m1.params()[i].second.values());
}

TEST_CASE("restore rejects unknown names and mismatched shapes") {
  TrainConfig cfg = tiny_config();
  Model m = build_model(cfg);

  CheckpointContents renamed;
  renamed.params = {{"no_such_param", Tensor({2}, {1.0, 2.0})}};
  ParamList target = m.params();
  CHECK_THROWS_AS(restore_params(renamed, target), std::runtime_error);

  CheckpointContents misshapen;
  misshapen.params = {{m.params()[0].first, Tensor({1}, {1.0})}};
  CHECK_THROWS_AS(restore_params(misshapen, target), std::runtime_error);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const fs::path dir = fresh_dir("corrupt");

  const std::string bad_magic = (dir / "bad.ngf").string();
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "XXXXgarbage";
  }
  CHECK_THROWS_AS(load_checkpoint(bad_magic), std::runtime_error);

  const std::string good = (dir / "good.ngf").string();
  TrainConfig cfg = tiny_config();
  Model m = build_model(cfg);
  save_checkpoint(good, m.params(), 1, cfg.hash());
  const auto size = fs::file_size(good);
  const std::string cut = (dir / "cut.ngf").string();
  fs::copy_file(good, cut);
  fs::resize_file(cut, size / 2);
  CHECK_THROWS_AS(load_checkpoint(cut), std::runtime_error);

  CHECK_THROWS_AS(load_checkpoint((dir / "absent.ngf").string()), std::runtime_error);
}

TEST_CASE("metrics serialize with empty cells for absent columns") {
  MetricRow a;
  a.step = 5;
  a.loss = 0.25;
  a.psnr = 20.0;
  a.utilization = 0.5;
  MetricRow b;
  b.step = 10;
  b.loss = 0.125;
  b.psnr = 21.0;
  b.occupancy = 0.75;
  CHECK(metrics_to_csv({a, b}) ==
        "step,loss,psnr,occupancy,utilization\n"
        "5,0.25,20,,0.5\n"
        "10,0.125,21,0.75,\n");
}

TEST_CASE("occupancy counts distinct mapped cells of significant points") {
  Rng rng(1);
  ContinuousGauge g = ContinuousGauge::init_mlp({8}, 2, rng);
  Tensor one({1, 3}, {0.2, 0.5, 0.8});
  CHECK(occupancy_metric(g, one, {1.0}) == 1.0 / 4096.0);
  CHECK(occupancy_metric(g, one, {1.0}, 2) == 0.25);

  Tensor twice({2, 3}, {0.2, 0.5, 0.8, 0.2, 0.5, 0.8});
  CHECK(occupancy_metric(g, twice, {1.0, 1.0}) == 1.0 / 4096.0);

  CHECK_THROWS_AS(occupancy_metric(g, one, {0.005}), std::invalid_argument);
  CHECK_THROWS_AS(occupancy_metric(g, Tensor({3}, {0.1, 0.2, 0.3}), {1.0}),
                  std::invalid_argument);
}

TEST_CASE("utilization is the fraction of entries winning somewhere") {
  Rng rng(2);
  DiscreteGauge g = DiscreteGauge::init({2}, 4, 1, rng);
  auto& logits = g.levels[0].logits.mutable_values();

  std::fill(logits.begin(), logits.end(), 0.0);  // ties resolve to entry 0
  CHECK(utilization_metric(g) == 0.25);

  for (std::int64_t r = 0; r < 8; ++r)  // alternate winners 0 and 1
    logits[static_cast<std::size_t>(r * 4 + (r % 2))] = 1.0;
  CHECK(utilization_metric(g) == 0.5);

  std::fill(logits.begin(), logits.end(), 0.0);
  for (std::int64_t r = 0; r < 8; ++r)  // every entry wins somewhere
    logits[static_cast<std::size_t>(r * 4 + (r % 4))] = 1.0;
  CHECK(utilization_metric(g) == 1.0);

  g.k = 3;  // the metric only looks at the argmax
  CHECK(utilization_metric(g) == 1.0);
}

TEST_CASE("zero steps produce an empty metric log") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 0;
  Model m = build_model(cfg);
  TrainResult res = train(m);
  CHECK(res.metrics.empty());
  CHECK(res.rejected_steps == 0);
}

TEST_CASE("a short run improves reconstruction over its first step") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 60;
  cfg.metric_cadence = 10;
  Model m = build_model(cfg);
  TrainResult res = train(m);
  REQUIRE(res.metrics.size() >= 2);
  CHECK(res.metrics.back().psnr > res.metrics.front().psnr);
  CHECK(res.metrics.back().loss < res.metrics.front().loss);
}

TEST_CASE("training is deterministic end to end") {
  TrainConfig cfg = tiny_config();
  cfg.steps = 6;
  cfg.metric_cadence = 2;
  cfg.regularizer = RegKind::kInfoReg;
  cfg.gamma = 0.5;
  cfg.epsilon = 0.05;

  auto run = [&cfg]() {
    Model m = build_model(cfg);
    TrainResult r = train(m);
    std::vector<double> out;
    for (const auto& row : r.metrics) {
      out.push_back(row.loss);
      out.push_back(row.psnr);
    }
    for (const auto& [name, t] : m.params())
      out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("evaluating a model against its own renders saturates psnr") {
  TrainConfig cfg = tiny_config();
  Model m = build_model(cfg);
  CameraRig rig = heldout_rig(cfg);
  RenderOptions opts = render_options(cfg);

  std::vector<Image> refs;
  for (std::size_t v = 0; v < rig.size(); ++v) {
    Image img;
    img.width = rig.width;
    img.height = rig.height;
    img.pixels = render_view(m, rig.camera(v), opts);
    refs.push_back(std::move(img));
  }
  EvalResult res = evaluate(m, rig, refs, opts);
  double mean = 0.0;
  for (double p : res.per_view) {
    CHECK(p == doctest::Approx(100.0).epsilon(1e-12));
    mean += p;
  }
  CHECK(res.mean == mean / static_cast<double>(res.per_view.size()));

  refs.pop_back();
  CHECK_THROWS_AS(evaluate(m, rig, refs, opts), std::invalid_argument);
}

TEST_CASE("surface samples carry positive weights and matching colors") {
  TrainConfig cfg = tiny_config();
  Model m = build_model(cfg);
  SurfaceSamples s = collect_surface_samples(m, 256);
  REQUIRE(!s.weights.empty());
  CHECK(s.points.dim(0) == static_cast<std::int64_t>(s.weights.size()));
  CHECK(s.colors.size() == s.weights.size() * 3);
  for (double w : s.weights) CHECK(w > 0.0);
  for (std::int64_t i = 0; i < s.points.numel(); ++i) {
    CHECK(s.points.value(i) >= 0.0);
    CHECK(s.points.value(i) <= 1.0);
  }
}

TEST_CASE("inverse gauge fitting reduces the cycle error") {
  Rng rng(3);
  ContinuousGauge g = ContinuousGauge::init_mlp({16}, 2, rng);
  Tensor pts({64, 3}, rng.uniform_vector(192, 0.0, 1.0));
  std::vector<double> w(64, 1.0);

  double early = 0.0, late = 0.0;
  fit_inverse_gauge(g, pts, w, 1, 11, &early);
  Mlp inv = fit_inverse_gauge(g, pts, w, 200, 11, &late);
  CHECK(std::isfinite(late));
  CHECK(late < early);
  CHECK(inv.input_dim() == 2);
  CHECK(inv.output_dim() == 3);
}
