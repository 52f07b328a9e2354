#pragma once

// Multi-sphere image: concentric equirectangular layers filled by sweeping
// the fisheye inputs, plus learnable occupancy/color logit channels.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "omsi/geometry.hpp"
#include "omsi/image.hpp"
#include "omsi/parallel.hpp"

namespace omsi {

template <typename Real>
inline Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline constexpr double kInitialOccupancyLogit = -2.0;

/// Four-node interpolation stencil on one layer. Indices address cells
/// within the layer (v * width + u).
struct BilinearStencil {
  std::array<std::uint32_t, 4> cell{};
  std::array<double, 4> weight{};
};

/// Stencil for a direction on a height x width equirectangular grid: wraps in
/// azimuth across the 0/2pi seam, clamps in elevation at the poles.
inline BilinearStencil equirect_stencil(int width, int height, double theta, double phi) {
  const Vec2 px = equirect_pixel(width, height, theta, phi);
  int ix = static_cast<int>(px.x());
  if (px.x() < ix) --ix;
  const double fx = px.x() - ix;
  int u0 = ix % width;
  if (u0 < 0) u0 += width;
  const int u1 = (u0 + 1) % width;

  int v0, v1;
  double fy;
  if (px.y() <= 0.0) {
    v0 = v1 = 0;
    fy = 0.0;
  } else if (px.y() >= height - 1.0) {
    v0 = v1 = height - 1;
    fy = 0.0;
  } else {
    v0 = static_cast<int>(px.y());
    v1 = v0 + 1;
    fy = px.y() - v0;
  }
  BilinearStencil s;
  const auto W = static_cast<std::uint32_t>(width);
  s.cell = {v0 * W + u0, v0 * W + u1, v1 * W + u0, v1 * W + u1};
  s.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return s;
}

struct ProjectedColor {
  std::array<double, 3> rgb{};
  bool valid = false;
};

/// Bilinear fisheye lookup at a projected pixel. Valid only when every
/// contributing pixel lies inside the image circle mask.
inline ProjectedColor sample_fisheye(const ImageRGB& img, const Mask& valid, const PixelProjection& proj) {
  ProjectedColor out;
  if (!proj.valid) return out;
  const int x0 = static_cast<int>(proj.pixel.x()), y0 = static_cast<int>(proj.pixel.y());
  const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
  const auto at = [&](int x, int y) { return valid[static_cast<std::size_t>(y) * img.width + x] != 0; };
  if (!(at(x0, y0) && at(x1, y0) && at(x0, y1) && at(x1, y1))) return out;
  out.rgb = sample_bilinear(img, proj.pixel.x(), proj.pixel.y());
  out.valid = true;
  return out;
}

/// Source images the sweep and the projected-color hints read from.
struct SourceViews {
  std::vector<FisheyeCamera> cameras;
  std::vector<ImageRGB> images;
  std::vector<Mask> valid;

  std::size_t size() const { return cameras.size(); }
};

/// Per-camera colors of the fisheye inputs at a rig-frame point.
inline std::vector<ProjectedColor> project_colors(const SourceViews& src, const Vec3& point_rig) {
  std::vector<ProjectedColor> out(src.size());
  for (std::size_t k = 0; k < src.size(); ++k)
    out[k] = sample_fisheye(src.images[k], src.valid[k], project_fisheye(src.cameras[k], point_rig));
  return out;
}

template <typename Real>
struct MsiGrid {
  SphereSchedule schedule;
  int height = 0;
  int width = 0;
  int n_cameras = 0;  // swept channel count; 0 when swept data is absent

  std::vector<Real> occ_logit;       // [layer][v][u]
  std::vector<Real> color_logit;     // [layer][v][u][3]
  std::vector<float> swept_rgb;      // [layer][v][u][camera][3]
  std::vector<std::uint8_t> swept_valid;  // [layer][v][u][camera]
  // Fixed per-cell statistics of the swept colors: masked mean rgb and the
  // photo-consistency variance.
  std::vector<float> swept_stats;    // [layer][v][u][4]

  MsiGrid() = default;
  MsiGrid(const SphereSchedule& s, int h, int w) : schedule(s), height(h), width(w) {
    s.validate();
    if (h <= 0 || w <= 0) throw std::invalid_argument("msi: non-positive grid size");
    occ_logit.assign(cell_count(), static_cast<Real>(kInitialOccupancyLogit));
    color_logit.assign(cell_count() * 3, Real(0));
  }

  int n_layers() const { return schedule.n_layers; }
  std::size_t layer_cells() const { return static_cast<std::size_t>(height) * width; }
  std::size_t cell_count() const { return layer_cells() * schedule.n_layers; }
  std::size_t cell_index(int n, int v, int u) const {
    return static_cast<std::size_t>(n) * layer_cells() + static_cast<std::size_t>(v) * width + u;
  }
  bool has_swept() const { return n_cameras > 0 && !swept_rgb.empty(); }
  std::size_t parameter_count() const { return occ_logit.size() + color_logit.size(); }

  /// Rig-frame center of cell (n, v, u).
  Vec3 cell_point(int n, int v, int u) const {
    const Spherical s = equirect_dir(width, height, u, v);
    return unit_ray_from_spherical(s.theta, s.phi) * schedule.radius(n);
  }

  BilinearStencil stencil(double theta, double phi) const { return equirect_stencil(width, height, theta, phi); }

  template <typename Other>
  MsiGrid<Other> cast() const {
    MsiGrid<Other> g;
    g.schedule = schedule;
    g.height = height;
    g.width = width;
    g.n_cameras = n_cameras;
    g.occ_logit.assign(occ_logit.begin(), occ_logit.end());
    g.color_logit.assign(color_logit.begin(), color_logit.end());
    g.swept_rgb = swept_rgb;
    g.swept_valid = swept_valid;
    g.swept_stats = swept_stats;
    return g;
  }
};

/// Interpolated values of one channel array with `C` interleaved channels on
/// layer n.
template <int C, typename Real>
std::array<double, C> interpolate_channels(std::span<const Real> channel, std::size_t layer_offset,
                                           const BilinearStencil& s) {
  std::array<double, C> out{};
  for (int i = 0; i < 4; ++i) {
    const Real* p = channel.data() + (layer_offset + s.cell[i]) * C;
    for (int c = 0; c < C; ++c) out[c] += s.weight[i] * p[c];
  }
  return out;
}

struct LayerSample {
  double occ_logit = 0.0;
  std::array<double, 3> color_logit{};
  BilinearStencil stencil;
};

/// Bilinear lookup of the learnable channels on layer n at (theta, phi).
template <typename Real>
LayerSample sample_layer_bilinear(const MsiGrid<Real>& grid, int n, double theta, double phi) {
  if (n < 0 || n >= grid.n_layers()) throw std::out_of_range("msi: layer index out of range");
  LayerSample out;
  out.stencil = grid.stencil(theta, phi);
  const std::size_t off = static_cast<std::size_t>(n) * grid.layer_cells();
  out.occ_logit = interpolate_channels<1, Real>(grid.occ_logit, off, out.stencil)[0];
  out.color_logit = interpolate_channels<3, Real>(grid.color_logit, off, out.stencil);
  return out;
}

/// Bilinear lookup of the swept statistics (mean rgb, variance).
template <typename Real>
std::array<double, 4> sample_swept_stats(const MsiGrid<Real>& grid, int n, const BilinearStencil& s) {
  if (grid.swept_stats.empty()) return {};
  return interpolate_channels<4, float>(grid.swept_stats, static_cast<std::size_t>(n) * grid.layer_cells(), s);
}

template <typename Real>
void compute_swept_stats(MsiGrid<Real>& grid) {
  const int K = grid.n_cameras;
  grid.swept_stats.assign(grid.cell_count() * 4, 0.0f);
  if (!grid.has_swept()) return;
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    std::array<double, 3> sum{}, sq{};
    int count = 0;
    for (int k = 0; k < K; ++k) {
      if (!grid.swept_valid[cell * K + k]) continue;
      ++count;
      for (int c = 0; c < 3; ++c) {
        const double x = grid.swept_rgb[(cell * K + k) * 3 + c];
        sum[c] += x;
        sq[c] += x * x;
      }
    }
    float* st = grid.swept_stats.data() + cell * 4;
    if (count == 0) continue;
    double var = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double mean = sum[c] / count;
      st[c] = static_cast<float>(mean);
      var += std::max(0.0, sq[c] / count - mean * mean);
    }
    st[3] = static_cast<float>(var / 3.0);
  }
}

/// Fills the swept channels: for every cell and camera, the bilinear image
/// color at the projection of the cell's point on its sphere.
template <typename Real>
MsiGrid<Real> sphere_sweep(const SourceViews& src, const SphereSchedule& schedule, int height, int width,
                           int threads = default_thread_count()) {
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (src.images[k].width != src.cameras[k].width || src.images[k].height != src.cameras[k].height)
      throw std::invalid_argument("sphere_sweep: image size does not match camera");
  }
  MsiGrid<Real> grid(schedule, height, width);
  const int K = static_cast<int>(src.size());
  grid.n_cameras = K;
  grid.swept_rgb.assign(grid.cell_count() * K * 3, 0.0f);
  grid.swept_valid.assign(grid.cell_count() * K, 0);
  const std::size_t rows = static_cast<std::size_t>(schedule.n_layers) * height;
  parallel_for(
      rows,
      [&](std::size_t rb, std::size_t re) {
        for (std::size_t row = rb; row < re; ++row) {
          const int n = static_cast<int>(row / height), v = static_cast<int>(row % height);
          for (int u = 0; u < width; ++u) {
            const std::size_t cell = grid.cell_index(n, v, u);
            const Vec3 p = grid.cell_point(n, v, u);
            for (int k = 0; k < K; ++k) {
              const ProjectedColor pc =
                  sample_fisheye(src.images[k], src.valid[k], project_fisheye(src.cameras[k], p));
              if (!pc.valid) continue;
              grid.swept_valid[cell * K + k] = 1;
              for (int c = 0; c < 3; ++c) grid.swept_rgb[(cell * K + k) * 3 + c] = static_cast<float>(pc.rgb[c]);
            }
          }
        }
      },
      threads);
  compute_swept_stats(grid);
  return grid;
}

/// Initializes the learnable channels from the sweep: color from the masked
/// mean of swept colors (0.5 where nothing is valid), occupancy logit -2.
template <typename Real>
void init_learnable(MsiGrid<Real>& grid) {
  if (grid.swept_stats.size() != grid.cell_count() * 4) compute_swept_stats(grid);
  const double lo = 1.0 / 510.0, hi = 1.0 - 1.0 / 510.0;
  const int K = grid.n_cameras;
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    grid.occ_logit[cell] = static_cast<Real>(kInitialOccupancyLogit);
    bool any = false;
    for (int k = 0; k < K && !any; ++k) any = grid.swept_valid[cell * K + k] != 0;
    for (int c = 0; c < 3; ++c) {
      const double mean = any ? std::clamp<double>(grid.swept_stats[cell * 4 + c], lo, hi) : 0.5;
      grid.color_logit[cell * 3 + c] = static_cast<Real>(logit(mean));
    }
  }
}

}  // namespace omsi
