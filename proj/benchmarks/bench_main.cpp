#include <benchmark/benchmark.h>

#include "ngf/assignment.hpp"
#include "ngf/regularize.hpp"
#include "ngf/render.hpp"
#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"
#include "ngf/train.hpp"

namespace {

ngf::Tensor random_points(std::int64_t n, std::int64_t d, ngf::Rng& rng,
                          bool requires_grad = false) {
  return ngf::Tensor({n, d}, rng.uniform_vector(static_cast<std::size_t>(n * d), 0.0, 1.0),
                     requires_grad);
}

void BM_MatmulBackward(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  ngf::Rng rng(7);
  ngf::Tensor a = random_points(n, n, rng, true);
  ngf::Tensor b = random_points(n, n, rng, true);
  for (auto _ : state) {
    ngf::Tape tape;
    ngf::Tape::Scope scope(tape);
    ngf::Tensor loss = ngf::mean(ngf::matmul(a, b));
    ngf::backward(loss);
    benchmark::DoNotOptimize(loss.item());
    a.zero_grad();
    b.zero_grad();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_Composite(benchmark::State& state) {
  const std::int64_t rays = state.range(0), n = 32;
  ngf::Rng rng(11);
  ngf::Tensor sigma = random_points(rays, n, rng, true);
  ngf::Tensor radiance = random_points(rays * n, 3, rng, true);
  std::vector<double> delta(static_cast<std::size_t>(rays * n), 0.02);
  for (auto _ : state) {
    ngf::Tape tape;
    ngf::Tape::Scope scope(tape);
    auto comp = ngf::composite(sigma, radiance, delta);
    ngf::backward(ngf::mean(comp.color));
    benchmark::DoNotOptimize(comp.color.item());
    sigma.zero_grad();
    radiance.zero_grad();
  }
}
BENCHMARK(BM_Composite)->Arg(64)->Arg(256)->Arg(1024);

void BM_EmdExact(benchmark::State& state) {
  const std::int64_t h = state.range(0);
  ngf::Rng rng(3);
  ngf::Tensor a = random_points(h, 2, rng);
  ngf::Tensor b = random_points(h, 2, rng);
  for (auto _ : state) {
    auto res = ngf::emd_exact(a, b);
    benchmark::DoNotOptimize(res.cost.item());
  }
}
BENCHMARK(BM_EmdExact)->Arg(16)->Arg(64)->Arg(128);

void BM_TrainStepContinuous(benchmark::State& state) {
  ngf::TrainConfig cfg;
  cfg.steps = 1;
  cfg.rays_per_batch = 64;
  cfg.samples_per_ray = 16;
  cfg.image_size = 16;
  cfg.train_views = 2;
  cfg.heldout_views = 1;
  cfg.field_hidden = {64, 64};
  for (auto _ : state) {
    ngf::Model model = ngf::build_model(cfg);
    auto result = ngf::train(model);
    benchmark::DoNotOptimize(result.metrics.size());
  }
}
BENCHMARK(BM_TrainStepContinuous)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
