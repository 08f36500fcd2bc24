#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ngf/image.hpp"
#include "ngf/scene.hpp"

using namespace ngf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ngf_scene_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image quantized_ramp(std::int64_t w, std::int64_t h) {
  // values on the 8-bit lattice so file round trips are exact
  Image img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(w * h) * 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<double>((i * 37) % 256) / 255.0;
  return img;
}

}  // namespace

TEST_CASE("sphere scene is solid at the center and empty at the corners") {
  VoxelScene s = make_toy_scene("sphere", 0);
  CHECK(s.density({0.5, 0.5, 0.5}) > 0.0);
  CHECK(s.density({0.0, 0.0, 0.0}) == 0.0);
  CHECK(s.density({1.0, 1.0, 1.0}) == 0.0);
}

TEST_CASE("scenes are deterministic per seed and colored in [0,1]") {
  for (const char* kind : {"sphere", "box", "blobs"}) {
    VoxelScene a = make_toy_scene(kind, 3);
    VoxelScene b = make_toy_scene(kind, 3);
    for (int i = 0; i < 100; ++i) {
      const double u = static_cast<double>(i) / 99.0;
      const std::array<double, 3> p{u, 1.0 - u, 0.5 + 0.4 * std::sin(7.0 * u)};
      CHECK(a.density(p) == b.density(p));
      CHECK(a.density(p) >= 0.0);
      const auto ca = a.color(p), cb = b.color(p);
      for (int ch = 0; ch < 3; ++ch) {
        CHECK(ca[static_cast<std::size_t>(ch)] == cb[static_cast<std::size_t>(ch)]);
        CHECK(ca[static_cast<std::size_t>(ch)] >= 0.0);
        CHECK(ca[static_cast<std::size_t>(ch)] <= 1.0);
      }
    }
  }
}

TEST_CASE("different seeds repaint the sphere") {
  VoxelScene a = make_toy_scene("sphere", 0);
  VoxelScene b = make_toy_scene("sphere", 1);
  bool differs = false;
  for (int i = 0; i < 32 && !differs; ++i) {
    const double az = 2.0 * 3.14159265358979323846 * static_cast<double>(i) / 32.0;
    const std::array<double, 3> p{0.5 + 0.25 * std::cos(az), 0.5 + 0.25 * std::sin(az), 0.5};
    differs = a.color(p) != b.color(p);
  }
  CHECK(differs);
}

TEST_CASE("surface texture varies across the sphere") {
  VoxelScene s = make_toy_scene("sphere", 0);
  CHECK(s.color({0.75, 0.5, 0.5}) != s.color({0.25, 0.5, 0.5}));
}

TEST_CASE("unknown scene kind is rejected") {
  CHECK_THROWS_AS(make_toy_scene("torus", 0), std::invalid_argument);
}

TEST_CASE("orbit cameras sit on the circle and look at the center") {
  const std::array<double, 3> center{0.5, 0.5, 0.5};
  const double radius = 1.25, elevation = 0.4;
  CameraRig rig = orbit_cameras(4, radius, elevation, center);
  REQUIRE(rig.size() == 4);
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const auto& t = rig.translations[i];
    const std::array<double, 3> d{t[0] - center[0], t[1] - center[1], t[2] - center[2]};
    const double dist = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    CHECK(std::abs(dist - radius) <= 1e-12);
    CHECK(std::abs(d[2] - radius * std::sin(elevation)) <= 1e-12);

    const auto& r = rig.rotations[i];
    // camera forward is -z: world forward must point at the center
    const std::array<double, 3> fwd{-r[2], -r[5], -r[8]};
    for (int a = 0; a < 3; ++a)
      CHECK(std::abs(fwd[static_cast<std::size_t>(a)] + d[static_cast<std::size_t>(a)] / dist) <= 1e-9);

    for (int c0 = 0; c0 < 3; ++c0)
      for (int c1 = 0; c1 < 3; ++c1) {
        double dot = 0.0;
        for (int row = 0; row < 3; ++row)
          dot += r[static_cast<std::size_t>(row * 3 + c0)] * r[static_cast<std::size_t>(row * 3 + c1)];
        CHECK(std::abs(dot - (c0 == c1 ? 1.0 : 0.0)) <= 1e-12);
      }
  }
}

TEST_CASE("orbit camera azimuths are equally spaced") {
  CameraRig rig = orbit_cameras(4, 2.0, 0.0);
  CHECK(std::abs(rig.translations[0][0] - 2.0) <= 1e-12);
  CHECK(std::abs(rig.translations[1][1] - 2.0) <= 1e-12);
  CHECK(std::abs(rig.translations[2][0] + 2.0) <= 1e-12);
  CHECK(std::abs(rig.translations[3][1] + 2.0) <= 1e-12);
}

TEST_CASE("orbit camera validation") {
  CHECK(orbit_cameras(1, 1.0, 0.3).size() == 1);
  CHECK_THROWS_AS(orbit_cameras(0, 1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(orbit_cameras(4, 0.0, 0.3), std::invalid_argument);
}

TEST_CASE("a zero-density scene renders the background everywhere") {
  VoxelScene empty;
  empty.kind = "empty";
  empty.density = [](const std::array<double, 3>&) { return 0.0; };
  empty.color = [](const std::array<double, 3>&) { return std::array<double, 3>{1, 1, 1}; };
  CameraRig rig = orbit_cameras(2, 1.25, 0.3, {0.5, 0.5, 0.5});
  rig.width = rig.height = 4;
  rig.focal = 4.0;
  RenderOptions opts;
  opts.samples_per_ray = 16;
  opts.background = {0.2, 0.3, 0.4};
  for (const Image& img : render_ground_truth(empty, rig, opts)) {
    for (std::int64_t y = 0; y < img.height; ++y)
      for (std::int64_t x = 0; x < img.width; ++x)
        for (int ch = 0; ch < 3; ++ch)
          CHECK(std::abs(img.at(y, x, ch) - opts.background[static_cast<std::size_t>(ch)]) <= 1e-12);
  }
}

TEST_CASE("ground-truth rendering is deterministic") {
  VoxelScene s = make_toy_scene("sphere", 2);
  CameraRig rig = orbit_cameras(1, 1.25, 0.4, {0.5, 0.5, 0.5});
  rig.width = rig.height = 8;
  rig.focal = 8.0;
  RenderOptions opts;
  opts.samples_per_ray = 32;
  opts.near = 0.2;
  opts.far = 2.6;
  opts.jitter = true;
  const Image a = render_ground_truth_view(s, rig.camera(0), opts);
  const Image b = render_ground_truth_view(s, rig.camera(0), opts);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("doubling the resolution preserves the image up to block averaging") {
  VoxelScene s = make_toy_scene("sphere", 0);
  CameraRig rig = orbit_cameras(1, 1.25, 0.4, {0.5, 0.5, 0.5});
  RenderOptions opts;
  opts.samples_per_ray = 96;
  opts.near = 0.2;
  opts.far = 2.6;

  rig.width = rig.height = 8;
  rig.focal = 8.0;
  const Image lo = render_ground_truth_view(s, rig.camera(0), opts);
  rig.width = rig.height = 16;
  rig.focal = 16.0;
  const Image hi = render_ground_truth_view(s, rig.camera(0), opts);

  // each low-res pixel shares its center with the matching 2x2 high-res block
  double total = 0.0;
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 8; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double block = 0.25 * (hi.at(2 * y, 2 * x, ch) + hi.at(2 * y, 2 * x + 1, ch) +
                                     hi.at(2 * y + 1, 2 * x, ch) + hi.at(2 * y + 1, 2 * x + 1, ch));
        total += std::abs(lo.at(y, x, ch) - block);
      }
  CHECK(total / (8.0 * 8.0 * 3.0) <= 0.08);
}

TEST_CASE("ppm write/read round trip is exact on the 8-bit lattice") {
  const fs::path dir = fresh_dir("ppm");
  const Image img = quantized_ramp(5, 3);
  const std::string path = (dir / "img.ppm").string();
  write_ppm(path, img);
  const Image back = read_ppm(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
}

TEST_CASE("png write/read round trip is exact on the 8-bit lattice") {
  const fs::path dir = fresh_dir("png");
  const Image img = quantized_ramp(4, 4);
  const std::string path = (dir / "img.png").string();
  write_png(path, img);
  const Image back = read_png(path);
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    CHECK(back.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-12));
}

TEST_CASE("dataset save/load round trips poses and focal") {
  const fs::path dir = fresh_dir("roundtrip");
  CameraRig rig = orbit_cameras(3, 1.5, 0.35, {0.5, 0.5, 0.5});
  rig.width = 6;
  rig.height = 6;
  rig.focal = 6.0;
  std::vector<Image> images(3, quantized_ramp(6, 6));
  save_nerf_dataset(dir.string(), rig, images);

  NerfDataset ds = load_nerf_dataset(dir.string());
  REQUIRE(ds.rig.size() == 3);
  REQUIRE(ds.images.size() == 3);
  CHECK(std::abs(ds.rig.focal - rig.focal) <= 1e-9);
  CHECK(ds.rig.width == rig.width);
  CHECK(ds.rig.height == rig.height);
  for (std::size_t i = 0; i < 3; ++i) {
    for (int k = 0; k < 9; ++k)
      CHECK(std::abs(ds.rig.rotations[i][static_cast<std::size_t>(k)] -
                     rig.rotations[i][static_cast<std::size_t>(k)]) <= 1e-9);
    for (int k = 0; k < 3; ++k)
      CHECK(std::abs(ds.rig.translations[i][static_cast<std::size_t>(k)] -
                     rig.translations[i][static_cast<std::size_t>(k)]) <= 1e-9);
    CHECK(ds.images[i].pixels == images[i].pixels);
  }
}

TEST_CASE("manifest focal conversion matches the synthetic-NeRF convention") {
  const fs::path dir = fresh_dir("focal");
  write_ppm((dir / "frame_0.ppm").string(), quantized_ramp(800, 1));
  std::ofstream out(dir / "transforms.json");
  out << R"({"camera_angle_x": 0.6911112,
             "frames": [{"file_path": "frame_0",
                         "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,2],[0,0,0,1]]}]})";
  out.close();
  NerfDataset ds = load_nerf_dataset(dir.string());
  CHECK(ds.rig.focal == doctest::Approx(1111.111).epsilon(1e-4));
  CHECK(ds.rig.translations[0][2] == 2.0);
}

TEST_CASE("missing manifest names the expected path") {
  const fs::path dir = fresh_dir("missing");
  CHECK_THROWS_WITH_AS(load_nerf_dataset(dir.string()),
                       doctest::Contains("transforms.json"), std::runtime_error);
}

TEST_CASE("a manifest without frames is rejected") {
  const fs::path dir = fresh_dir("noframes");
  std::ofstream out(dir / "transforms.json");
  out << R"({"camera_angle_x": 0.7, "frames": []})";
  out.close();
  CHECK_THROWS_AS(load_nerf_dataset(dir.string()), std::runtime_error);
}
