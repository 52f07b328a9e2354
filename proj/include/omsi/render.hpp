#pragma once

// Sphere-intersection ray sampling and occupancy compositing of color and
// inverse depth.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "omsi/field.hpp"
#include "omsi/geometry.hpp"
#include "omsi/image.hpp"
#include "omsi/msi.hpp"
#include "omsi/parallel.hpp"

namespace omsi {

struct OutOfVolumeError : std::domain_error {
  using std::domain_error::domain_error;
};

struct RaySample {
  int layer = 0;
  double z = 0.0;
  Vec3 point = Vec3::Zero();
  Spherical dir;        // spherical coordinates of the point on its layer
  double inv_depth = 0; // 1 / z
};

/// Intersections with every layer that encloses the ray origin, ordered by
/// increasing z (innermost sphere first).
inline void sample_ray_spheres(const Ray& ray, const SphereSchedule& schedule, std::vector<RaySample>& out) {
  out.clear();
  const double origin_norm = ray.origin.norm();
  if (!(origin_norm < schedule.background_radius()))
    throw OutOfVolumeError("ray origin outside the background sphere");
  const bool centered = origin_norm == 0.0;
  const Spherical center_dir = centered ? spherical_from_unit_ray(ray.dir) : Spherical{};
  for (int n = schedule.n_layers - 1; n >= 0; --n) {
    const double radius = schedule.radius(n);
    const auto z = intersect_sphere(ray, radius);
    if (!z) continue;
    RaySample s;
    s.layer = n;
    s.z = *z;
    s.point = ray.at(*z);
    s.dir = centered ? center_dir : spherical_from_unit_ray(s.point / radius);
    s.inv_depth = 1.0 / *z;
    out.push_back(s);
  }
}

inline std::vector<RaySample> sample_ray_spheres(const Ray& ray, const SphereSchedule& schedule) {
  std::vector<RaySample> out;
  out.reserve(schedule.n_layers);
  sample_ray_spheres(ray, schedule, out);
  return out;
}

struct RenderResult {
  std::array<double, 3> rgb{};
  double inv_depth = 0.0;
  double acc = 0.0;
};

/// w_i = o_i * prod_{j<i} (1 - o_j); rgb, inverse depth and acc are the
/// w-weighted sums.
inline RenderResult composite(std::span<const double> occ, std::span<const std::array<double, 3>> rgb,
                              std::span<const double> inv_depth) {
  RenderResult r;
  double transmittance = 1.0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const double w = occ[i] * transmittance;
    for (int c = 0; c < 3; ++c) r.rgb[c] += w * rgb[i][c];
    r.inv_depth += w * inv_depth[i];
    r.acc += w;
    transmittance *= 1.0 - occ[i];
  }
  return r;
}

inline std::vector<double> composite_weights(std::span<const double> occ) {
  std::vector<double> w(occ.size());
  double transmittance = 1.0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    w[i] = occ[i] * transmittance;
    transmittance *= 1.0 - occ[i];
  }
  return w;
}

struct CompositeGradient {
  std::vector<double> d_occ;
  std::vector<std::array<double, 3>> d_rgb;
};

/// Backward pass of composite. Uses the suffix recursion
/// R_{i-1} = o_i g_i + (1 - o_i) R_i, which needs no division by (1 - o).
inline CompositeGradient composite_backward(std::span<const double> occ, std::span<const std::array<double, 3>> rgb,
                                            std::span<const double> inv_depth, const std::array<double, 3>& d_rgb,
                                            double d_inv_depth, double d_acc) {
  const std::size_t n = occ.size();
  CompositeGradient g{std::vector<double>(n), std::vector<std::array<double, 3>>(n)};
  std::vector<double> trans(n);
  double t = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    trans[i] = t;
    t *= 1.0 - occ[i];
  }
  double suffix = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double gk = d_rgb[0] * rgb[k][0] + d_rgb[1] * rgb[k][1] + d_rgb[2] * rgb[k][2] +
                      d_inv_depth * inv_depth[k] + d_acc;
    g.d_occ[k] = trans[k] * (gk - suffix);
    const double w = occ[k] * trans[k];
    for (int c = 0; c < 3; ++c) g.d_rgb[k][c] = w * d_rgb[c];
    suffix = occ[k] * gk + (1.0 - occ[k]) * suffix;
  }
  return g;
}

/// Builds the field query for a sample: interpolated features from the grid
/// and, when sources are given, projected colors.
template <typename Real>
QueryContext make_query(const MsiGrid<Real>& grid, const SourceViews* sources, const Ray& ray, const RaySample& s,
                        bool with_mlp_inputs, BilinearStencil* stencil_out = nullptr) {
  QueryContext q;
  q.x = s.point;
  q.d = ray.dir;
  const LayerSample ls = sample_layer_bilinear(grid, s.layer, s.dir.theta, s.dir.phi);
  q.f_geo[0] = ls.occ_logit;
  for (int c = 0; c < 3; ++c) q.f_appr[c] = ls.color_logit[c];
  if (with_mlp_inputs) {
    const auto stats = sample_swept_stats(grid, s.layer, ls.stencil);
    for (int c = 0; c < 3; ++c) q.f_appr[3 + c] = stats[c];
    q.f_geo[1] = stats[3];
    if (sources) q.c_proj = project_colors(*sources, s.point);
  }
  if (stencil_out) *stencil_out = ls.stencil;
  return q;
}

/// Full per-ray pipeline: sphere samples, feature lookup, field, composite.
template <typename Real>
RenderResult render_ray(const FieldParams& params, const MsiGrid<Real>& grid, const SourceViews* sources,
                        const Ray& ray) {
  thread_local std::vector<RaySample> samples;
  sample_ray_spheres(ray, grid.schedule, samples);
  const bool mlp = params.backend == Backend::kMlp;
  if (mlp && !sources) throw std::invalid_argument("render_ray: MLP backend needs source views");
  std::vector<double> occ(samples.size()), inv(samples.size());
  std::vector<std::array<double, 3>> rgb(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FieldOutput o = eval(params, make_query(grid, sources, ray, samples[i], mlp));
    occ[i] = o.occupancy;
    rgb[i] = o.rgb;
    inv[i] = samples[i].inv_depth;
  }
  return composite(occ, rgb, inv);
}

// ---------------------------------------------------------------------------
// Whole-view rendering

struct ViewTarget {
  enum class Kind { kEquirect, kFisheye, kPinhole };
  Kind kind = Kind::kEquirect;
  int width = 256;
  int height = 128;
  double fov_deg = 90.0;  // pinhole horizontal FoV
  FisheyeCamera camera;   // fisheye targets

  static ViewTarget equirect(int w, int h) { return {Kind::kEquirect, w, h, 90.0, {}}; }
  static ViewTarget pinhole(int w, int h, double fov_deg) { return {Kind::kPinhole, w, h, fov_deg, {}}; }
  static ViewTarget fisheye(const FisheyeCamera& cam) { return {Kind::kFisheye, cam.width, cam.height, 0.0, cam}; }
};

/// Ray for pixel (u, v) of the target, in the local frame of `pose`, then
/// mapped into the rig frame. Empty for fisheye pixels outside the circle.
inline std::optional<Ray> target_ray(const ViewTarget& t, int u, int v, const Pose& pose) {
  Ray local;
  switch (t.kind) {
    case ViewTarget::Kind::kEquirect: {
      const Spherical s = equirect_dir(t.width, t.height, u, v);
      local.dir = unit_ray_from_spherical(s.theta, s.phi);
      break;
    }
    case ViewTarget::Kind::kPinhole: {
      // +z forward, +x right, +y down.
      const double f = 0.5 * t.width / std::tan(0.5 * t.fov_deg * kPi / 180.0);
      local.dir = Vec3((u - 0.5 * (t.width - 1)) / f, (v - 0.5 * (t.height - 1)) / f, 1.0).normalized();
      break;
    }
    case ViewTarget::Kind::kFisheye: {
      const Vec2 px(u, v);
      if (!t.camera.in_image_circle(px)) return std::nullopt;
      local = unproject_fisheye(t.camera, px);
      break;
    }
  }
  return Ray{pose.apply(local.origin), pose.rotate(local.dir).normalized()};
}

struct RenderedView {
  ImageRGB rgb;
  ImageGray inv_depth;
  ImageGray acc;
};

inline void check_pose_in_volume(const Pose& pose, const SphereSchedule& schedule) {
  if (!(pose.position.norm() < schedule.background_radius()))
    throw OutOfVolumeError("pose outside the background sphere");
}

template <typename Real>
RenderedView render_view(const FieldParams& params, const MsiGrid<Real>& grid, const SourceViews* sources,
                         const ViewTarget& target, const Pose& pose, int threads = default_thread_count()) {
  check_pose_in_volume(pose, grid.schedule);
  if (target.width <= 0 || target.height <= 0) throw std::invalid_argument("render_view: bad target size");
  RenderedView out{ImageRGB(target.width, target.height), ImageGray(target.width, target.height),
                   ImageGray(target.width, target.height)};
  parallel_for(
      static_cast<std::size_t>(target.height),
      [&](std::size_t vb, std::size_t ve) {
        for (auto v = static_cast<int>(vb); v < static_cast<int>(ve); ++v)
          for (int u = 0; u < target.width; ++u) {
            const auto ray = target_ray(target, u, v, pose);
            if (!ray) continue;
            if (!(ray->origin.norm() < grid.schedule.background_radius()))
              throw OutOfVolumeError("ray origin outside the background sphere");
            const RenderResult r = render_ray(params, grid, sources, *ray);
            for (int c = 0; c < 3; ++c) out.rgb(u, v, c) = static_cast<float>(r.rgb[c]);
            out.inv_depth(u, v) = static_cast<float>(r.inv_depth);
            out.acc(u, v) = static_cast<float>(r.acc);
          }
      },
      threads);
  return out;
}

}  // namespace omsi
