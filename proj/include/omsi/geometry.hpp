#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace omsi {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Rigid transform. Maps points of the local frame into the parent frame:
/// p_parent = orientation * p_local + position.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : position(p), orientation(q.normalized()) {}

  Vec3 apply(const Vec3& local) const { return orientation * local + position; }
  Vec3 apply_inverse(const Vec3& parent) const {
    return orientation.conjugate() * (parent - position);
  }
  Vec3 rotate(const Vec3& v) const { return orientation * v; }

  static Pose identity() { return {}; }
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 dir = Vec3::UnitZ();

  Vec3 at(double t) const { return origin + t * dir; }
};

struct Spherical {
  double theta = 0.0;  // azimuth in [0, 2pi)
  double phi = 0.0;    // elevation in [-pi/2, pi/2]
};

namespace detail {

// Rational arctangent (Cephes atan coefficients); within an ulp of std::atan
// and several times cheaper than glibc's atan2 on the sampling hot path.
inline double atan_rational(double x) {
  constexpr double P[5] = {-8.750608600031904122785e-1, -1.615753718733365076637e1, -7.500855792314704667340e1,
                           -1.228866684490136173410e2, -6.485021904942025371773e1};
  constexpr double Q[5] = {2.485846490142306297962e1, 1.650270098316988542046e2, 4.328810604912902668951e2,
                           4.853903996359136964868e2, 1.945506571482613964425e2};
  constexpr double kMoreBits = 6.123233995736765886130e-17;
  const bool neg = x < 0.0;
  if (neg) x = -x;
  double base = 0.0, extra = 0.0;
  if (x > 2.41421356237309504880) {
    base = kPi / 2.0;
    extra = kMoreBits;
    x = -1.0 / x;
  } else if (x > 0.66) {
    base = kPi / 4.0;
    extra = 0.5 * kMoreBits;
    x = (x - 1.0) / (x + 1.0);
  }
  const double z = x * x;
  const double p = (((P[0] * z + P[1]) * z + P[2]) * z + P[3]) * z + P[4];
  const double q = ((((z + Q[0]) * z + Q[1]) * z + Q[2]) * z + Q[3]) * z + Q[4];
  const double r = base + (x * z * p / q + x + extra);
  return neg ? -r : r;
}

}  // namespace detail

/// atan2 with std::atan2 sign conventions for finite arguments.
inline double fast_atan2(double y, double x) {
  const double ax = std::abs(x), ay = std::abs(y);
  if (ax == 0.0 && ay == 0.0) return std::signbit(x) ? std::copysign(kPi, y) : y;
  double a = ay <= ax ? detail::atan_rational(ay / ax) : kPi / 2.0 - detail::atan_rational(ax / ay);
  if (std::signbit(x)) a = kPi - a;
  return std::signbit(y) ? -a : a;
}

// Unit ray for azimuth/elevation: (cos phi cos theta, sin phi, cos phi sin theta).
inline Vec3 unit_ray_from_spherical(double theta, double phi) {
  const double cp = std::cos(phi);
  return {cp * std::cos(theta), std::sin(phi), cp * std::sin(theta)};
}

inline double wrap_azimuth(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

/// Inverse of unit_ray_from_spherical. Theta is 0 at the poles.
inline Spherical spherical_from_unit_ray(const Vec3& v) {
  const double horiz = std::sqrt(v.x() * v.x() + v.z() * v.z());
  Spherical s;
  s.phi = fast_atan2(v.y(), horiz);
  s.theta = horiz == 0.0 ? 0.0 : wrap_azimuth(fast_atan2(v.z(), v.x()));
  return s;
}

/// Pixel-center convention; v grows downward so the top row is near +pi/2.
inline Spherical equirect_dir(int width, int height, double u, double v) {
  return {kTwoPi * (u + 0.5) / width, kPi / 2.0 - kPi * (v + 0.5) / height};
}

/// Continuous pixel coordinates of a direction; inverse of equirect_dir.
inline Vec2 equirect_pixel(int width, int height, double theta, double phi) {
  return {theta * width / kTwoPi - 0.5, (kPi / 2.0 - phi) * height / kPi - 0.5};
}

// ---------------------------------------------------------------------------
// Fisheye camera (equidistant model, r_px = focal * incident_angle)

struct PixelProjection {
  Vec2 pixel = Vec2::Zero();
  bool valid = false;
};

/// Equiangular fisheye. Camera frame: +z optical axis, +x right, +y down.
/// Pixel coordinates put integer values at pixel centers.
struct FisheyeCamera {
  int width = 0;
  int height = 0;
  double focal = 0.0;  // pixels per radian of incident angle
  Vec2 principal_point = Vec2::Zero();
  double fov_max = 0.0;  // full field of view, radians
  Pose pose_rig_from_cam;

  double half_fov() const { return 0.5 * fov_max; }
  double image_circle_radius() const { return focal * half_fov(); }

  void validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("fisheye: non-positive image size");
    if (!(focal > 0.0)) throw std::invalid_argument("fisheye: focal must be positive");
    if (!(fov_max > 0.0 && fov_max < kTwoPi))
      throw std::invalid_argument("fisheye: fov_max must lie in (0, 2pi)");
    const double r = image_circle_radius();
    const double cx = principal_point.x(), cy = principal_point.y();
    const double room = std::min({cx, width - 1.0 - cx, cy, height - 1.0 - cy});
    if (r > room + 1e-9) throw std::invalid_argument("fisheye: image circle exceeds the image");
  }

  bool in_bounds(const Vec2& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width - 1.0 && px.y() <= height - 1.0;
  }

  bool in_image_circle(const Vec2& px) const {
    return (px - principal_point).norm() <= image_circle_radius() * (1.0 + 1e-12);
  }

  /// A camera whose image circle touches the outermost pixel centers.
  static FisheyeCamera centered(int width, int height, double fov_max, const Pose& pose) {
    FisheyeCamera cam;
    cam.width = width;
    cam.height = height;
    cam.fov_max = fov_max;
    cam.principal_point = {0.5 * (width - 1), 0.5 * (height - 1)};
    cam.focal = 0.5 * (std::min(width, height) - 1) / cam.half_fov();
    cam.pose_rig_from_cam = pose;
    return cam;
  }
};

/// Projects a rig-frame point. Invalid when the point sits on the optical
/// center, lies outside the FoV cone or falls outside the image.
inline PixelProjection project_fisheye(const FisheyeCamera& cam, const Vec3& point_rig) {
  const Vec3 p = cam.pose_rig_from_cam.apply_inverse(point_rig);
  PixelProjection out;
  const double planar = std::sqrt(p.x() * p.x() + p.y() * p.y());
  if (planar == 0.0 && p.z() == 0.0) return out;
  const double alpha = fast_atan2(planar, p.z());
  if (planar == 0.0) {
    out.pixel = cam.principal_point;
  } else {
    const double scale = cam.focal * alpha / planar;
    out.pixel = cam.principal_point + scale * Vec2(p.x(), p.y());
  }
  out.valid = alpha <= cam.half_fov() && cam.in_bounds(out.pixel);
  return out;
}

/// Direction in the camera frame for a pixel, without an image-circle check.
inline Vec3 fisheye_bearing(const FisheyeCamera& cam, const Vec2& pixel) {
  const Vec2 d = pixel - cam.principal_point;
  const double r = d.norm();
  if (r == 0.0) return Vec3::UnitZ();
  const double alpha = r / cam.focal;
  const double s = std::sin(alpha) / r;
  return {s * d.x(), s * d.y(), std::cos(alpha)};
}

/// Rig-frame ray through a pixel. Throws for pixels outside the image circle.
inline Ray unproject_fisheye(const FisheyeCamera& cam, const Vec2& pixel) {
  if (!cam.in_image_circle(pixel)) throw std::domain_error("unproject_fisheye: pixel outside image circle");
  Ray r;
  r.origin = cam.pose_rig_from_cam.position;
  r.dir = cam.pose_rig_from_cam.rotate(fisheye_bearing(cam, pixel)).normalized();
  return r;
}

/// Outward-facing camera pose at the given azimuth on a horizontal circle.
inline Pose outward_pose(double azimuth, double circle_radius) {
  const Vec3 z = unit_ray_from_spherical(azimuth, 0.0);
  const Vec3 y(0.0, -1.0, 0.0);
  const Vec3 x = y.cross(z);
  Mat3 rot;
  rot.col(0) = x;
  rot.col(1) = y;
  rot.col(2) = z;
  return {circle_radius * z, Quat(rot)};
}

struct RigConfig {
  int image_width = 320;
  int image_height = 320;
  double fov_max = 220.0 * kPi / 180.0;
  double circle_diameter = 0.4;  // m
  int n_cameras = 4;
};

/// Cameras evenly spaced in azimuth, facing outward.
inline std::vector<FisheyeCamera> make_rig(const RigConfig& cfg = {}) {
  std::vector<FisheyeCamera> cams;
  cams.reserve(cfg.n_cameras);
  for (int k = 0; k < cfg.n_cameras; ++k) {
    const double az = kTwoPi * k / cfg.n_cameras;
    cams.push_back(FisheyeCamera::centered(cfg.image_width, cfg.image_height, cfg.fov_max,
                                           outward_pose(az, 0.5 * cfg.circle_diameter)));
  }
  return cams;
}

// ---------------------------------------------------------------------------
// Sphere layers

struct SphereSchedule {
  int n_layers = 64;
  double d_inv_max = 2.0;         // m^-1
  double eps_background = 1e-3;   // m^-1, stands in for inverse depth 0

  void validate() const {
    if (n_layers < 2) throw std::invalid_argument("schedule: need at least two layers");
    if (!(eps_background > 0.0) || !(d_inv_max > eps_background))
      throw std::invalid_argument("schedule: require d_inv_max > eps_background > 0");
  }

  double inverse_depth(int n) const {
    if (n == 0) return eps_background;
    return n * d_inv_max / (n_layers - 1);
  }
  double radius(int n) const { return 1.0 / inverse_depth(n); }
  double background_radius() const { return radius(0); }
};

/// Layer radii, index 0 (background) first, so radii descend.
inline std::vector<double> sphere_layer_radii(const SphereSchedule& s) {
  s.validate();
  std::vector<double> r(s.n_layers);
  for (int n = 0; n < s.n_layers; ++n) r[n] = s.radius(n);
  return r;
}

/// Forward intersection of a ray leaving from inside a sphere centered at
/// the rig origin. Empty when the origin is not strictly inside.
inline std::optional<double> intersect_sphere(const Ray& ray, double radius) {
  const double oo = ray.origin.squaredNorm();
  if (std::sqrt(oo) >= radius) return std::nullopt;
  const double a = ray.dir.squaredNorm();
  const double b = 2.0 * ray.dir.dot(ray.origin);
  const double c = oo - radius * radius;
  const double root = std::sqrt(std::max(0.0, b * b - 4.0 * a * c));
  // Same root as (-b + root) / 2a; the second form avoids cancellation for b > 0.
  if (b <= 0.0) return (-b + root) / (2.0 * a);
  return (2.0 * c) / (-b - root);
}

}  // namespace omsi
