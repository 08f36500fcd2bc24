#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ngf/rng.hpp"
#include "ngf/tensor.hpp"

namespace ngf {

struct Ray {
  std::array<double, 3> origin{};
  std::array<double, 3> direction{};  // unit length
  double near = 0.0;
  double far = 1.0;
};

struct Camera {
  std::array<double, 9> rotation{};     // row-major camera-to-world
  std::array<double, 3> translation{};  // camera origin in world space
  double focal = 0.0;                   // pixels
  std::int64_t width = 0;
  std::int64_t height = 0;
};

/// Pinhole rays through pixel centers, world space, unit directions.
/// Pixel coords are (col, row) pairs. OpenGL-style camera axes: x right,
/// y up, looking down -z.
std::vector<Ray> make_rays(const Camera& cam,
                           const std::vector<std::pair<std::int64_t, std::int64_t>>& pixels,
                           double near, double far);

struct SamplePositions {
  std::vector<double> t;      // n distances along the ray
  std::vector<double> delta;  // n intervals, last one is the remainder
};

/// One sample per equal sub-interval of [near, far]; uniformly jittered
/// inside its interval when enabled, interval midpoints otherwise.
SamplePositions stratified_sample(const Ray& ray, std::int64_t n, Rng& rng, bool jitter);

struct CompositeResult {
  Tensor color;    // B x 3, before background blending
  Tensor weights;  // B x n, radiance contribution per shading point
  Tensor final_t;  // B, transmittance after the last sample
};

/// Volume compositing over a batch of rays: sigma and delta are B x n,
/// radiance is (B*n) x 3. Differentiable with respect to sigma and radiance.
CompositeResult composite(const Tensor& sigma, const Tensor& radiance,
                          const std::vector<double>& delta);

/// Accumulated color plus (1 - sum w) * background.
Tensor apply_background(const CompositeResult& comp, const std::array<double, 3>& background);

/// -10 log10(max(MSE, 1e-10)); identical images cap at 100 dB.
double psnr(const std::vector<double>& image, const std::vector<double>& reference);

}  // namespace ngf
