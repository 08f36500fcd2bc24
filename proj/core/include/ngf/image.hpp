#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ngf {

/// Row-major RGB image with channels in [0,1].
struct Image {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<double> pixels;  // height * width * 3

  double& at(std::int64_t y, std::int64_t x, int ch) {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + ch)];
  }
  double at(std::int64_t y, std::int64_t x, int ch) const {
    return pixels[static_cast<std::size_t>((y * width + x) * 3 + ch)];
  }
};

/// Binary P6, 8-bit. The exact fixture format.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

/// 8-bit RGB PNG, ingestion only.
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& img);

}  // namespace ngf
