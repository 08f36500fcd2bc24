#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ngf/image.hpp"
#include "ngf/render.hpp"
#include "ngf/rng.hpp"

namespace ngf {

/// Analytic ground-truth scene over the unit cube: density >= 0 everywhere,
/// colors in [0,1]^3, deterministic per seed.
struct VoxelScene {
  std::string kind;
  std::uint64_t seed = 0;
  std::function<double(const std::array<double, 3>&)> density;
  std::function<std::array<double, 3>(const std::array<double, 3>&)> color;
};

VoxelScene make_toy_scene(const std::string& kind, std::uint64_t seed);

struct CameraRig {
  std::vector<std::array<double, 9>> rotations;     // camera-to-world, row-major
  std::vector<std::array<double, 3>> translations;  // camera origins
  double focal = 0.0;
  std::int64_t width = 0;
  std::int64_t height = 0;

  Camera camera(std::size_t i) const {
    return Camera{rotations[i], translations[i], focal, width, height};
  }
  std::size_t size() const { return rotations.size(); }
};

/// n poses at equal azimuths on a circle of the given radius and elevation,
/// all looking at `center`.
CameraRig orbit_cameras(std::int64_t n, double radius, double elevation,
                        const std::array<double, 3>& center = {0.0, 0.0, 0.0});

struct RenderOptions {
  std::int64_t samples_per_ray = 64;
  double near = 0.05;
  double far = 2.5;
  std::array<double, 3> background{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;
  bool jitter = false;
};

/// Composites the analytic scene along pinhole rays — the same transmittance
/// model the training path uses, so targets are realizable.
std::vector<Image> render_ground_truth(const VoxelScene& scene, const CameraRig& rig,
                                       const RenderOptions& opts);
Image render_ground_truth_view(const VoxelScene& scene, const Camera& cam,
                               const RenderOptions& opts);

/// Plain-double compositing of one ray, shared by the ground-truth path.
std::array<double, 3> composite_ray(const std::vector<double>& sigma,
                                    const std::vector<double>& rgb,
                                    const std::vector<double>& delta,
                                    const std::array<double, 3>& background,
                                    std::vector<double>* weights_out = nullptr);

struct NerfDataset {
  CameraRig rig;
  std::vector<Image> images;
};

/// Synthetic-NeRF style ingestion: a transforms.json manifest with
/// camera_angle_x and per-frame camera-to-world matrices, plus image files
/// (PPM exact, PNG accepted).
NerfDataset load_nerf_dataset(const std::string& dir);
void save_nerf_dataset(const std::string& dir, const CameraRig& rig,
                       const std::vector<Image>& images);

}  // namespace ngf
