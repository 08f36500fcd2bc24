#include "ngf/scene.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ngf {

namespace {

constexpr double kPi = 3.14159265358979323846;

double length3(const std::array<double, 3>& v) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

std::array<double, 3> normalized(const std::array<double, 3>& v) {
  const double n = length3(v);
  return {v[0] / n, v[1] / n, v[2] / n};
}

std::array<double, 3> cross(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

// Smooth step from 1 to 0 across [edge - width, edge + width].
double falloff(double x, double edge, double width) {
  const double t = std::clamp((edge + width - x) / (2.0 * width), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

std::array<double, 3> checker_colors(std::uint64_t seed, bool alt) {
  // two texture palettes derived from the seed
  const double hue = static_cast<double>(seed % 7) / 7.0;
  if (!alt) return {0.85, 0.25 + 0.4 * hue, 0.15};
  return {0.1, 0.35, 0.8 - 0.3 * hue};
}

}  // namespace

VoxelScene make_toy_scene(const std::string& kind, std::uint64_t seed) {
  VoxelScene scene;
  scene.kind = kind;
  scene.seed = seed;
  const std::array<double, 3> center{0.5, 0.5, 0.5};
  const double phase = static_cast<double>(seed % 11) * 0.13;

  if (kind == "sphere") {
    // solid ball, checkered surface texture driven by spherical angles
    const double radius = 0.3;
    scene.density = [center, radius](const std::array<double, 3>& p) {
      const std::array<double, 3> d{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
      return 60.0 * falloff(length3(d), radius, 0.02);
    };
    scene.color = [center, seed, phase](const std::array<double, 3>& p) {
      const std::array<double, 3> d{p[0] - center[0], p[1] - center[1], p[2] - center[2]};
      const double az = std::atan2(d[1], d[0]) + phase;
      const double el = std::atan2(d[2], std::sqrt(d[0] * d[0] + d[1] * d[1]));
      const int ca = static_cast<int>(std::floor(az / (kPi / 4.0)));
      const int ce = static_cast<int>(std::floor((el + kPi / 2.0) / (kPi / 4.0)));
      auto c = checker_colors(seed, ((ca + ce) & 1) != 0);
      // radial gradient keeps the texture non-constant inside each tile
      const double g = 0.75 + 0.25 * std::sin(6.0 * az) * std::cos(4.0 * el);
      return std::array<double, 3>{c[0] * g, c[1] * g, c[2] * g};
    };
  } else if (kind == "box") {
    scene.density = [](const std::array<double, 3>& p) {
      double inside = 1.0;
      for (int a = 0; a < 3; ++a)
        inside *= falloff(std::abs(p[static_cast<std::size_t>(a)] - 0.5), 0.2, 0.015);
      return 60.0 * inside;
    };
    scene.color = [seed, phase](const std::array<double, 3>& p) {
      const int cx = static_cast<int>(std::floor((p[0] + phase) * 8.0));
      const int cy = static_cast<int>(std::floor((p[1] + phase) * 8.0));
      const int cz = static_cast<int>(std::floor(p[2] * 8.0));
      auto c = checker_colors(seed, ((cx + cy + cz) & 1) != 0);
      return std::array<double, 3>{c[0], c[1] * (0.5 + p[2] * 0.5), c[2]};
    };
  } else if (kind == "blobs") {
    const std::array<double, 3> c1{0.35, 0.4, 0.5};
    const std::array<double, 3> c2{0.65, 0.6, 0.5};
    scene.density = [c1, c2](const std::array<double, 3>& p) {
      auto blob = [&p](const std::array<double, 3>& c) {
        const std::array<double, 3> d{p[0] - c[0], p[1] - c[1], p[2] - c[2]};
        return 60.0 * falloff(length3(d), 0.16, 0.02);
      };
      return blob(c1) + blob(c2);
    };
    scene.color = [c1, seed, phase](const std::array<double, 3>& p) {
      const bool first = (p[0] - c1[0]) * (p[0] - c1[0]) < 0.03;
      const int tile = static_cast<int>(std::floor((p[0] + p[1] + phase) * 10.0));
      auto c = checker_colors(seed, ((tile & 1) != 0) != first);
      return c;
    };
  } else {
    throw std::invalid_argument("make_toy_scene: unknown kind '" + kind + "'");
  }
  return scene;
}

CameraRig orbit_cameras(std::int64_t n, double radius, double elevation,
                        const std::array<double, 3>& center) {
  if (n < 1) throw std::invalid_argument("orbit_cameras: n must be >= 1");
  if (radius <= 0.0) throw std::invalid_argument("orbit_cameras: radius must be positive");
  CameraRig rig;
  for (std::int64_t i = 0; i < n; ++i) {
    const double az = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    const std::array<double, 3> pos{center[0] + radius * std::cos(az) * std::cos(elevation),
                                    center[1] + radius * std::sin(az) * std::cos(elevation),
                                    center[2] + radius * std::sin(elevation)};
    const std::array<double, 3> forward =
        normalized({center[0] - pos[0], center[1] - pos[1], center[2] - pos[2]});
    std::array<double, 3> world_up{0.0, 0.0, 1.0};
    if (std::abs(forward[2]) > 0.999) world_up = {0.0, 1.0, 0.0};
    const std::array<double, 3> right = normalized(cross(forward, world_up));
    const std::array<double, 3> up = cross(right, forward);
    // columns: right, up, -forward (camera looks down -z)
    rig.rotations.push_back({right[0], up[0], -forward[0],
                             right[1], up[1], -forward[1],
                             right[2], up[2], -forward[2]});
    rig.translations.push_back(pos);
  }
  return rig;
}

std::array<double, 3> composite_ray(const std::vector<double>& sigma,
                                    const std::vector<double>& rgb,
                                    const std::vector<double>& delta,
                                    const std::array<double, 3>& background,
                                    std::vector<double>* weights_out) {
  std::array<double, 3> color{0.0, 0.0, 0.0};
  double log_t = 0.0;
  if (weights_out) weights_out->resize(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double sd = sigma[i] * delta[i];
    const double w = std::exp(log_t) * (1.0 - std::exp(-sd));
    if (weights_out) (*weights_out)[i] = w;
    for (int ch = 0; ch < 3; ++ch) color[static_cast<std::size_t>(ch)] += w * rgb[i * 3 + static_cast<std::size_t>(ch)];
    log_t -= sd;
  }
  const double t_final = std::exp(log_t);
  for (int ch = 0; ch < 3; ++ch)
    color[static_cast<std::size_t>(ch)] += t_final * background[static_cast<std::size_t>(ch)];
  return color;
}

Image render_ground_truth_view(const VoxelScene& scene, const Camera& cam,
                               const RenderOptions& opts) {
  Image img;
  img.width = cam.width;
  img.height = cam.height;
  img.pixels.resize(static_cast<std::size_t>(cam.width * cam.height) * 3);

  Rng rng(opts.seed);
  std::vector<std::pair<std::int64_t, std::int64_t>> pixels;
  pixels.reserve(static_cast<std::size_t>(cam.width * cam.height));
  for (std::int64_t y = 0; y < cam.height; ++y)
    for (std::int64_t x = 0; x < cam.width; ++x) pixels.emplace_back(x, y);
  const auto rays = make_rays(cam, pixels, opts.near, opts.far);

  std::vector<double> sigma(static_cast<std::size_t>(opts.samples_per_ray));
  std::vector<double> rgb(static_cast<std::size_t>(opts.samples_per_ray) * 3);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const auto samples = stratified_sample(rays[r], opts.samples_per_ray, rng, opts.jitter);
    for (std::int64_t i = 0; i < opts.samples_per_ray; ++i) {
      const std::array<double, 3> p{
          rays[r].origin[0] + samples.t[static_cast<std::size_t>(i)] * rays[r].direction[0],
          rays[r].origin[1] + samples.t[static_cast<std::size_t>(i)] * rays[r].direction[1],
          rays[r].origin[2] + samples.t[static_cast<std::size_t>(i)] * rays[r].direction[2]};
      const bool inside = p[0] >= 0.0 && p[0] <= 1.0 && p[1] >= 0.0 && p[1] <= 1.0 &&
                          p[2] >= 0.0 && p[2] <= 1.0;
      sigma[static_cast<std::size_t>(i)] = inside ? scene.density(p) : 0.0;
      const auto c = inside ? scene.color(p) : std::array<double, 3>{0.0, 0.0, 0.0};
      for (int ch = 0; ch < 3; ++ch)
        rgb[static_cast<std::size_t>(i * 3 + ch)] = c[static_cast<std::size_t>(ch)];
    }
    const auto color = composite_ray(sigma, rgb, samples.delta, opts.background);
    for (int ch = 0; ch < 3; ++ch)
      img.pixels[r * 3 + static_cast<std::size_t>(ch)] = color[static_cast<std::size_t>(ch)];
  }
  return img;
}

std::vector<Image> render_ground_truth(const VoxelScene& scene, const CameraRig& rig,
                                       const RenderOptions& opts) {
  std::vector<Image> images;
  images.reserve(rig.size());
  for (std::size_t i = 0; i < rig.size(); ++i)
    images.push_back(render_ground_truth_view(scene, rig.camera(i), opts));
  return images;
}

NerfDataset load_nerf_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path manifest_path = fs::path(dir) / "transforms.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw std::runtime_error("load_nerf_dataset: missing manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_nerf_dataset: bad manifest " + manifest_path.string() +
                             ": " + e.what());
  }
  if (!manifest.contains("camera_angle_x") || !manifest.contains("frames"))
    throw std::runtime_error("load_nerf_dataset: manifest " + manifest_path.string() +
                             " lacks camera_angle_x/frames");
  const auto& frames = manifest["frames"];
  if (frames.empty())
    throw std::runtime_error("load_nerf_dataset: manifest " + manifest_path.string() +
                             " has no frames");

  NerfDataset ds;
  for (const auto& frame : frames) {
    const std::string file = frame.at("file_path").get<std::string>();
    fs::path img_path = fs::path(dir) / file;
    if (!fs::exists(img_path)) {
      if (fs::exists(img_path.string() + ".png"))
        img_path = img_path.string() + ".png";
      else if (fs::exists(img_path.string() + ".ppm"))
        img_path = img_path.string() + ".ppm";
      else
        throw std::runtime_error("load_nerf_dataset: missing image " + img_path.string());
    }
    Image img = img_path.extension() == ".ppm" ? read_ppm(img_path.string())
                                               : read_png(img_path.string());
    const auto& m = frame.at("transform_matrix");
    std::array<double, 9> rot{};
    std::array<double, 3> tr{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) rot[static_cast<std::size_t>(r * 3 + c)] = m.at(r).at(c).get<double>();
      tr[static_cast<std::size_t>(r)] = m.at(r).at(3).get<double>();
    }
    ds.rig.rotations.push_back(rot);
    ds.rig.translations.push_back(tr);
    ds.images.push_back(std::move(img));
  }
  ds.rig.width = ds.images[0].width;
  ds.rig.height = ds.images[0].height;
  const double angle_x = manifest["camera_angle_x"].get<double>();
  ds.rig.focal = 0.5 * static_cast<double>(ds.rig.width) / std::tan(0.5 * angle_x);
  return ds;
}

void save_nerf_dataset(const std::string& dir, const CameraRig& rig,
                       const std::vector<Image>& images) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["camera_angle_x"] =
      2.0 * std::atan(0.5 * static_cast<double>(rig.width) / rig.focal);
  manifest["frames"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rig.size(); ++i) {
    const std::string name = "frame_" + std::to_string(i);
    nlohmann::json frame;
    frame["file_path"] = name;
    nlohmann::json matrix = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < 4; ++c) {
        double v = 0.0;
        if (r < 3 && c < 3) v = rig.rotations[i][static_cast<std::size_t>(r * 3 + c)];
        else if (r < 3) v = rig.translations[i][static_cast<std::size_t>(r)];
        else v = (c == 3) ? 1.0 : 0.0;
        row.push_back(v);
      }
      matrix.push_back(row);
    }
    frame["transform_matrix"] = matrix;
    manifest["frames"].push_back(frame);
    if (i < images.size()) write_png((fs::path(dir) / (name + ".png")).string(), images[i]);
  }
  std::ofstream out(fs::path(dir) / "transforms.json");
  out << manifest.dump(2) << "\n";
}

}  // namespace ngf
