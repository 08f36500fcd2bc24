#include <doctest.h>

#include <cmath>

#include "ngf/render.hpp"
#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"

using namespace ngf;

namespace {

Camera identity_camera(std::int64_t size, double focal) {
  Camera cam;
  cam.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  cam.translation = {0, 0, 0};
  cam.focal = focal;
  cam.width = size;
  cam.height = size;
  return cam;
}

}  // namespace

TEST_CASE("center pixel of an axis-aligned camera looks down -z") {
  Camera cam = identity_camera(3, 10.0);
  const auto rays = make_rays(cam, {{1, 1}}, 0.1, 2.0);
  CHECK(rays[0].direction[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rays[0].direction[1] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(rays[0].direction[2] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("ray directions are unit length for all pixels") {
  Camera cam = identity_camera(8, 6.0);
  std::vector<std::pair<std::int64_t, std::int64_t>> pixels;
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 8; ++x) pixels.emplace_back(x, y);
  for (const Ray& r : make_rays(cam, pixels, 0.1, 2.0)) {
    const double n = std::sqrt(r.direction[0] * r.direction[0] +
                               r.direction[1] * r.direction[1] +
                               r.direction[2] * r.direction[2]);
    CHECK(std::abs(n - 1.0) <= 1e-9);
  }
}

TEST_CASE("horizontally mirrored pixels give mirrored x components") {
  Camera cam = identity_camera(6, 5.0);
  const auto rays = make_rays(cam, {{0, 2}, {5, 2}}, 0.1, 2.0);
  CHECK(rays[0].direction[0] == doctest::Approx(-rays[1].direction[0]).epsilon(1e-12));
  CHECK(rays[0].direction[1] == doctest::Approx(rays[1].direction[1]).epsilon(1e-12));
}

TEST_CASE("make_rays validates focal and pose") {
  Camera cam = identity_camera(4, 0.0);
  CHECK_THROWS_AS(make_rays(cam, {{0, 0}}, 0.1, 2.0), std::invalid_argument);
  cam.focal = 5.0;
  cam.rotation = {0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(make_rays(cam, {{0, 0}}, 0.1, 2.0), std::invalid_argument);
}

TEST_CASE("stratified midpoints for near=0 far=1 n=4") {
  Ray ray;
  ray.near = 0.0;
  ray.far = 1.0;
  Rng rng(1);
  const auto s = stratified_sample(ray, 4, rng, false);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) CHECK(s.t[static_cast<std::size_t>(i)] == doctest::Approx(expect[i]).epsilon(1e-15));
}

TEST_CASE("stratified deltas cover the full interval") {
  Ray ray;
  ray.near = 0.3;
  ray.far = 2.1;
  Rng rng(2);
  for (bool jitter : {false, true}) {
    const auto s = stratified_sample(ray, 7, rng, jitter);
    double total = 0.0;
    for (double d : s.delta) total += d;
    // deltas run from the first sample to the far plane
    CHECK(std::abs((s.t[0] + total) - ray.far) <= 1e-12);
  }
  CHECK_THROWS_AS(stratified_sample(ray, 0, rng, false), std::invalid_argument);
}

TEST_CASE("stratified sampling is deterministic under a fixed seed") {
  Ray ray;
  ray.near = 0.0;
  ray.far = 1.0;
  Rng r1(5), r2(5);
  CHECK(stratified_sample(ray, 16, r1, true).t == stratified_sample(ray, 16, r2, true).t);
}

TEST_CASE("zero density composites to nothing") {
  Tensor sigma = Tensor::zeros({1, 4});
  Tensor rad({4, 3}, std::vector<double>(12, 0.8));
  auto res = composite(sigma, rad, {0.25, 0.25, 0.25, 0.25});
  for (int ch = 0; ch < 3; ++ch) CHECK(res.color.value(ch) == 0.0);
  for (int i = 0; i < 4; ++i) CHECK(res.weights.value(i) == 0.0);
  CHECK(res.final_t.value(0) == 1.0);
}

TEST_CASE("single sample alpha is 1 - exp(-sigma delta)") {
  Tensor sigma({1, 1}, {2.0});
  Tensor rad({1, 3}, {1.0, 1.0, 1.0});
  auto res = composite(sigma, rad, {0.5});
  CHECK(res.weights.value(0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("two equal samples give the closed-form transmittance") {
  Tensor sigma({1, 2}, {1.0, 1.0});
  Tensor rad({2, 3}, std::vector<double>(6, 1.0));
  auto res = composite(sigma, rad, {1.0, 1.0});
  CHECK(res.final_t.value(0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(res.weights.value(0) + res.weights.value(1) ==
        doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("composite rejects negative density and bad intervals") {
  Tensor rad({1, 3}, {0.5, 0.5, 0.5});
  CHECK_THROWS_AS(composite(Tensor({1, 1}, {-0.1}), rad, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(composite(Tensor({1, 1}, {0.1}), rad, {0.0}), std::invalid_argument);
}

TEST_CASE("weight conservation holds on random rays") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t n = 1 + rng.uniform_int(12);
    Tensor sigma({1, n}, rng.uniform_vector(static_cast<std::size_t>(n), 0.0, 20.0));
    Tensor rad({n, 3}, rng.uniform_vector(static_cast<std::size_t>(n) * 3, 0.0, 1.0));
    std::vector<double> delta(static_cast<std::size_t>(n));
    for (auto& d : delta) d = rng.uniform(0.01, 0.3);
    auto res = composite(sigma, rad, delta);
    double wsum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      CHECK(res.weights.value(i) >= 0.0);
      wsum += res.weights.value(i);
    }
    CHECK(std::abs(wsum + res.final_t.value(0) - 1.0) <= 1e-9);
  }
}

TEST_CASE("raising any density never raises the final transmittance") {
  Rng rng(4);
  std::vector<double> s = rng.uniform_vector(6, 0.0, 5.0);
  std::vector<double> delta(6, 0.1);
  Tensor rad({6, 3}, std::vector<double>(18, 0.5));
  const double base = composite(Tensor({1, 6}, s), rad, delta).final_t.value(0);
  for (int i = 0; i < 6; ++i) {
    auto bumped = s;
    bumped[static_cast<std::size_t>(i)] += 1.0;
    CHECK(composite(Tensor({1, 6}, bumped), rad, delta).final_t.value(0) <= base + 1e-15);
  }
}

TEST_CASE("composite gradients match finite differences on a random 8-sample ray") {
  Rng rng(5);
  std::vector<double> delta(8);
  for (auto& d : delta) d = rng.uniform(0.05, 0.2);
  Tensor rad({8, 3}, rng.uniform_vector(24, 0.0, 1.0));
  Tensor sigma({1, 8}, rng.uniform_vector(8, 0.1, 4.0), true);

  const double err_sigma = grad_check(
      [&](const Tensor& s) { return mean(composite(s, rad, delta).color); }, sigma, 1e-5);
  CHECK(err_sigma <= 1e-5);

  Tensor sigma_fixed({1, 8}, rng.uniform_vector(8, 0.1, 4.0));
  Tensor rad_p({8, 3}, rng.uniform_vector(24, 0.0, 1.0), true);
  const double err_rad = grad_check(
      [&](const Tensor& c) { return mean(composite(sigma_fixed, c, delta).color); },
      rad_p, 1e-5);
  CHECK(err_rad <= 1e-5);
}

TEST_CASE("background fills the untouched transmittance") {
  Tensor sigma = Tensor::zeros({1, 2});
  Tensor rad({2, 3}, std::vector<double>(6, 1.0));
  auto res = composite(sigma, rad, {0.5, 0.5});
  Tensor out = apply_background(res, {0.2, 0.4, 0.6});
  CHECK(out.value(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(out.value(1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(out.value(2) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("psnr caps, scales, and is symmetric") {
  std::vector<double> a(12, 0.5);
  CHECK(psnr(a, a) == doctest::Approx(100.0).epsilon(1e-12));

  std::vector<double> b(12, 0.6);  // MSE = 0.01
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(psnr(a, b) == psnr(b, a));

  std::vector<double> c(9, 0.5);
  CHECK_THROWS_AS(psnr(a, c), std::invalid_argument);
}
