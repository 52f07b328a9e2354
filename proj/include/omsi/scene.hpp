#pragma once

// Analytic scenes and a ray-tracing oracle producing ground-truth fisheye
// images and inverse-depth panoramas.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "omsi/geometry.hpp"
#include "omsi/image.hpp"
#include "omsi/parallel.hpp"

namespace omsi {

using Rgb = Eigen::Vector3d;

struct SphereShape {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct BoxShape {
  Vec3 min = -Vec3::Ones();
  Vec3 max = Vec3::Ones();
};

/// Plane n.x = offset, clipped to |p - offset*n|_inf <= extent.
struct PlaneShape {
  Vec3 normal = Vec3::UnitY();
  double offset = 0.0;
  double extent = 1.0;
};

struct SolidTexture {
  Rgb rgb = Rgb::Constant(0.5);
};

/// 3-D checker of cubic cells.
struct CheckerTexture {
  Rgb rgb_a = Rgb::Constant(0.2);
  Rgb rgb_b = Rgb::Constant(0.8);
  double cell_size = 0.5;
};

/// Linear blend along one world axis between lo_coord and hi_coord.
struct AxisGradientTexture {
  Rgb rgb_lo = Rgb::Zero();
  Rgb rgb_hi = Rgb::Ones();
  int axis = 1;
  double lo_coord = -1.0;
  double hi_coord = 1.0;
};

using Shape = std::variant<SphereShape, BoxShape, PlaneShape>;
using Texture = std::variant<SolidTexture, CheckerTexture, AxisGradientTexture>;

struct Primitive {
  Shape shape;
  Texture texture;
};

struct SceneDesc {
  std::vector<Primitive> primitives;
  Rgb background_rgb = Rgb::Zero();

  void validate() const;
};

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  Rgb rgb = Rgb::Zero();

  bool hit() const { return std::isfinite(depth); }
};

namespace detail {

inline bool unit_color(const Rgb& c) { return (c.array() >= 0.0).all() && (c.array() <= 1.0).all(); }

inline constexpr double kHitEps = 1e-9;

inline std::optional<double> hit_sphere(const SphereShape& s, const Ray& r) {
  const Vec3 oc = r.origin - s.center;
  const double b = oc.dot(r.dir);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  if (const double t0 = -b - sq; t0 > kHitEps) return t0;
  if (const double t1 = -b + sq; t1 > kHitEps) return t1;
  return std::nullopt;
}

inline std::optional<double> hit_box(const BoxShape& bx, const Ray& r) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = r.origin[a], d = r.dir[a];
    if (d == 0.0) {
      if (o < bx.min[a] || o > bx.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (bx.min[a] - o) / d, t1 = (bx.max[a] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
  }
  if (tmin > tmax) return std::nullopt;
  if (tmin > kHitEps) return tmin;
  if (tmax > kHitEps) return tmax;
  return std::nullopt;
}

inline std::optional<double> hit_plane(const PlaneShape& p, const Ray& r) {
  const double denom = p.normal.dot(r.dir);
  if (denom == 0.0) return std::nullopt;
  const double t = (p.offset - p.normal.dot(r.origin)) / denom;
  if (!(t > kHitEps)) return std::nullopt;
  const Vec3 local = r.at(t) - p.offset * p.normal;
  if (local.cwiseAbs().maxCoeff() > p.extent) return std::nullopt;
  return t;
}

inline Rgb shade(const Texture& tex, const Vec3& p) {
  return std::visit(
      [&](const auto& t) -> Rgb {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SolidTexture>) {
          return t.rgb;
        } else if constexpr (std::is_same_v<T, CheckerTexture>) {
          const auto cell = (p / t.cell_size).array().floor();
          const auto parity = static_cast<long long>(cell.sum());
          return (parity % 2 == 0) ? t.rgb_a : t.rgb_b;
        } else {
          const double s = std::clamp((p[t.axis] - t.lo_coord) / (t.hi_coord - t.lo_coord), 0.0, 1.0);
          return (1.0 - s) * t.rgb_lo + s * t.rgb_hi;
        }
      },
      tex);
}

}  // namespace detail

inline void SceneDesc::validate() const {
  if (!detail::unit_color(background_rgb)) throw std::invalid_argument("scene: background outside [0,1]");
  for (const auto& prim : primitives) {
    std::visit(
        [](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SphereShape>) {
            if (!(s.radius > 0.0)) throw std::invalid_argument("scene: sphere radius must be positive");
          } else if constexpr (std::is_same_v<T, BoxShape>) {
            if (!(s.min.array() < s.max.array()).all()) throw std::invalid_argument("scene: box min must be < max");
          } else {
            if (!(s.extent > 0.0) || std::abs(s.normal.norm() - 1.0) > 1e-9)
              throw std::invalid_argument("scene: plane needs unit normal and positive extent");
          }
        },
        prim.shape);
    std::visit(
        [](const auto& t) {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, SolidTexture>) {
            if (!detail::unit_color(t.rgb)) throw std::invalid_argument("scene: color outside [0,1]");
          } else if constexpr (std::is_same_v<T, CheckerTexture>) {
            if (!detail::unit_color(t.rgb_a) || !detail::unit_color(t.rgb_b) || !(t.cell_size > 0.0))
              throw std::invalid_argument("scene: invalid checker texture");
          } else {
            if (!detail::unit_color(t.rgb_lo) || !detail::unit_color(t.rgb_hi) || t.axis < 0 || t.axis > 2 ||
                !(t.hi_coord > t.lo_coord))
              throw std::invalid_argument("scene: invalid gradient texture");
          }
        },
        prim.texture);
  }
}

/// Nearest positive hit; unlit albedo. Misses return infinite depth and the
/// background color.
inline Hit trace_ray(const SceneDesc& scene, const Ray& ray) {
  Hit best;
  best.rgb = scene.background_rgb;
  const Primitive* best_prim = nullptr;
  for (const auto& prim : scene.primitives) {
    const auto t = std::visit(
        [&](const auto& s) -> std::optional<double> {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, SphereShape>) return detail::hit_sphere(s, ray);
          else if constexpr (std::is_same_v<T, BoxShape>) return detail::hit_box(s, ray);
          else return detail::hit_plane(s, ray);
        },
        prim.shape);
    if (t && *t < best.depth) {
      best.depth = *t;
      best_prim = &prim;
    }
  }
  if (best_prim) {
    // Texture lookup slightly in front of the surface so cell parity does not
    // flicker on walls that coincide with cell boundaries.
    const Vec3 p = ray.at(best.depth) - 1e-7 * ray.dir;
    best.rgb = detail::shade(best_prim->texture, p);
  }
  return best;
}

struct FisheyeRender {
  ImageRGB rgb;
  Mask valid;  // 1 inside the image circle
};

/// Ground-truth fisheye image. Pixels outside the image circle are black.
inline FisheyeRender render_fisheye_gt(const SceneDesc& scene, const FisheyeCamera& cam,
                                       int threads = default_thread_count()) {
  cam.validate();
  FisheyeRender out{ImageRGB(cam.width, cam.height), Mask(static_cast<std::size_t>(cam.width) * cam.height, 0)};
  parallel_for(
      static_cast<std::size_t>(cam.height),
      [&](std::size_t vb, std::size_t ve) {
        for (auto v = static_cast<int>(vb); v < static_cast<int>(ve); ++v) {
          for (int u = 0; u < cam.width; ++u) {
            const Vec2 px(u, v);
            if (!cam.in_image_circle(px)) continue;
            const Hit h = trace_ray(scene, unproject_fisheye(cam, px));
            float* dst = out.rgb.at(u, v);
            for (int c = 0; c < 3; ++c) dst[c] = static_cast<float>(h.rgb[c]);
            out.valid[static_cast<std::size_t>(v) * cam.width + u] = 1;
          }
        }
      },
      threads);
  return out;
}

/// Equirectangular ray through pixel (u, v) for a viewer at `pose`.
inline Ray equirect_ray(int width, int height, int u, int v, const Pose& pose = {}) {
  const Spherical s = equirect_dir(width, height, u, v);
  return {pose.position, pose.rotate(unit_ray_from_spherical(s.theta, s.phi))};
}

/// Inverse-depth panorama (m^-1) at the rig origin; misses map to 0.
inline ImageGray render_panorama_depth_gt(const SceneDesc& scene, int width, int height,
                                          int threads = default_thread_count()) {
  ImageGray out(width, height);
  parallel_for(
      static_cast<std::size_t>(height),
      [&](std::size_t vb, std::size_t ve) {
        for (auto v = static_cast<int>(vb); v < static_cast<int>(ve); ++v)
          for (int u = 0; u < width; ++u) {
            const Hit h = trace_ray(scene, equirect_ray(width, height, u, v));
            out(u, v) = h.hit() ? static_cast<float>(1.0 / h.depth) : 0.0f;
          }
      },
      threads);
  return out;
}

/// Equirectangular color render from an arbitrary pose.
inline ImageRGB render_panorama_rgb_gt(const SceneDesc& scene, int width, int height, const Pose& pose = {},
                                       int threads = default_thread_count()) {
  ImageRGB out(width, height);
  parallel_for(
      static_cast<std::size_t>(height),
      [&](std::size_t vb, std::size_t ve) {
        for (auto v = static_cast<int>(vb); v < static_cast<int>(ve); ++v)
          for (int u = 0; u < width; ++u) {
            const Hit h = trace_ray(scene, equirect_ray(width, height, u, v, pose));
            for (int c = 0; c < 3; ++c) out(u, v, c) = static_cast<float>(h.rgb[c]);
          }
      },
      threads);
  return out;
}

struct SampleBundle {
  std::vector<FisheyeCamera> cameras;
  std::vector<ImageRGB> fisheye_images;
  std::vector<Mask> fisheye_valid;
  ImageGray gt_inv_depth;
  std::optional<ImageRGB> gt_panorama_rgb;
  std::optional<SceneDesc> scene;  // kept for oracle renders during evaluation

  void validate() const {
    if (cameras.size() != fisheye_images.size() || cameras.size() != fisheye_valid.size())
      throw std::invalid_argument("bundle: camera/image count mismatch");
    for (std::size_t k = 0; k < cameras.size(); ++k) {
      if (fisheye_images[k].width != cameras[k].width || fisheye_images[k].height != cameras[k].height)
        throw std::invalid_argument("bundle: image size does not match camera");
      if (fisheye_valid[k].size() != fisheye_images[k].pixel_count())
        throw std::invalid_argument("bundle: mask size mismatch");
    }
    if (gt_inv_depth.empty()) throw std::invalid_argument("bundle: missing ground-truth depth");
  }
};

/// Validity masks follow the image circle.
inline Mask image_circle_mask(const FisheyeCamera& cam) {
  Mask m(static_cast<std::size_t>(cam.width) * cam.height, 0);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u)
      m[static_cast<std::size_t>(v) * cam.width + u] = cam.in_image_circle(Vec2(u, v)) ? 1 : 0;
  return m;
}

inline SampleBundle generate_bundle(const SceneDesc& scene, const std::vector<FisheyeCamera>& cameras,
                                    int pano_width, int pano_height, bool with_panorama_rgb = true,
                                    int threads = default_thread_count()) {
  scene.validate();
  SampleBundle b;
  b.cameras = cameras;
  for (const auto& cam : cameras) {
    auto r = render_fisheye_gt(scene, cam, threads);
    b.fisheye_images.push_back(std::move(r.rgb));
    b.fisheye_valid.push_back(std::move(r.valid));
  }
  b.gt_inv_depth = render_panorama_depth_gt(scene, pano_width, pano_height, threads);
  if (with_panorama_rgb) b.gt_panorama_rgb = render_panorama_rgb_gt(scene, pano_width, pano_height, {}, threads);
  b.scene = scene;
  return b;
}

// ---------------------------------------------------------------------------
// Procedural rooms

/// Portable uniform draws (std distributions differ across standard libraries).
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }

 private:
  std::mt19937_64 engine_;
};

/// Axis-aligned checker room (3-5 m wide, 2.6-3.4 m tall) around the rig with
/// 2-5 interior spheres or boxes. Deterministic per seed.
inline SceneDesc make_room_scene(std::uint64_t seed) {
  SceneRng rng(seed);
  SceneDesc s;
  s.background_rgb = Rgb(0.0, 0.0, 0.0);

  const Vec3 half(rng.uniform(1.5, 2.5), rng.uniform(1.3, 1.7), rng.uniform(1.5, 2.5));
  const Vec3 shift(rng.uniform(-0.25, 0.25), rng.uniform(-0.2, 0.2), rng.uniform(-0.25, 0.25));
  CheckerTexture walls;
  walls.rgb_a = Rgb(rng.uniform(0.55, 0.7), rng.uniform(0.5, 0.65), rng.uniform(0.45, 0.6));
  walls.rgb_b = Rgb(rng.uniform(0.3, 0.45), rng.uniform(0.35, 0.5), rng.uniform(0.4, 0.55));
  walls.cell_size = 0.6;
  s.primitives.push_back({BoxShape{shift - half, shift + half}, walls});

  const int n_objects = rng.integer(2, 5);
  for (int i = 0; i < n_objects; ++i) {
    const double az = rng.uniform(0.0, kTwoPi);
    const double el = rng.uniform(-0.35, 0.35);
    const double size = rng.uniform(0.2, 0.35);
    const Vec3 dir = unit_ray_from_spherical(az, el);
    // Keep objects well outside the innermost layer and inside the room.
    double max_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (std::abs(dir[a]) < 1e-9) continue;
      const double wall = dir[a] > 0 ? shift[a] + half[a] : shift[a] - half[a];
      max_dist = std::min(max_dist, (wall - std::copysign(size + 0.15, dir[a])) / dir[a]);
    }
    const double dist = rng.uniform(size + 0.8, std::max(size + 0.85, max_dist));
    const Vec3 c = dist * dir;
    Texture tex;
    if (rng.uniform() < 0.5) {
      tex = SolidTexture{Rgb(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85))};
    } else {
      tex = AxisGradientTexture{Rgb(rng.uniform(0.15, 0.5), rng.uniform(0.15, 0.5), rng.uniform(0.15, 0.5)),
                                Rgb(rng.uniform(0.5, 0.85), rng.uniform(0.5, 0.85), rng.uniform(0.5, 0.85)),
                                1, c.y() - size, c.y() + size};
    }
    if (rng.uniform() < 0.5) {
      s.primitives.push_back({SphereShape{c, size}, tex});
    } else {
      s.primitives.push_back({BoxShape{c - Vec3::Constant(size), c + Vec3::Constant(size)}, tex});
    }
  }
  return s;
}

}  // namespace omsi
