#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace omsi {

/// Row-major float image with interleaved channels.
template <int C>
struct Image {
  static constexpr int kChannels = C;

  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * C, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  float* at(int u, int v) { return data.data() + (static_cast<std::size_t>(v) * width + u) * C; }
  const float* at(int u, int v) const {
    return data.data() + (static_cast<std::size_t>(v) * width + u) * C;
  }
  float& operator()(int u, int v, int c = 0) { return at(u, v)[c]; }
  float operator()(int u, int v, int c = 0) const { return at(u, v)[c]; }

  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image&) const = default;
};

using ImageRGB = Image<3>;
using ImageGray = Image<1>;
using Mask = std::vector<std::uint8_t>;

/// Bilinear sample with integer coordinates at pixel centers; coordinates
/// are clamped to the image.
template <int C>
std::array<double, C> sample_bilinear(const Image<C>& img, double x, double y) {
  x = std::clamp(x, 0.0, img.width - 1.0);
  y = std::clamp(y, 0.0, img.height - 1.0);
  const int x0 = std::min(static_cast<int>(x), img.width - 1);
  const int y0 = std::min(static_cast<int>(y), img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0, fy = y - y0;
  const float* p00 = img.at(x0, y0);
  const float* p10 = img.at(x1, y0);
  const float* p01 = img.at(x0, y1);
  const float* p11 = img.at(x1, y1);
  std::array<double, C> out{};
  for (int c = 0; c < C; ++c) {
    out[c] = (1 - fy) * ((1 - fx) * p00[c] + fx * p10[c]) + fy * ((1 - fx) * p01[c] + fx * p11[c]);
  }
  return out;
}

inline std::uint8_t quantize_unit(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace omsi
