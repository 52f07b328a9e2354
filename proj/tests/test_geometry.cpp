#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "omsi/geometry.hpp"
#include "support.hpp"

using namespace omsi;

TEST(SphericalRay, AxisCases) {
  EXPECT_EQ(unit_ray_from_spherical(0.0, 0.0), Vec3(1, 0, 0));
  const Vec3 z = unit_ray_from_spherical(kPi / 2, 0.0);
  EXPECT_NEAR(z.x(), 0.0, 1e-16);
  EXPECT_EQ(z.y(), 0.0);
  EXPECT_EQ(z.z(), 1.0);
  const Vec3 y = unit_ray_from_spherical(0.0, kPi / 2);
  EXPECT_NEAR(y.x(), 0.0, 1e-16);
  EXPECT_EQ(y.y(), 1.0);
  EXPECT_EQ(y.z(), 0.0);
}

TEST(SphericalRay, UnitNorm) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> th(0.0, kTwoPi), ph(-kPi / 2, kPi / 2);
  for (int i = 0; i < 10000; ++i) EXPECT_NEAR(unit_ray_from_spherical(th(rng), ph(rng)).norm(), 1.0, 1e-12);
}

TEST(SphericalRay, Inverse) {
  Spherical s = spherical_from_unit_ray({0, 0, 1});
  EXPECT_NEAR(s.theta, kPi / 2, 1e-15);
  EXPECT_NEAR(s.phi, 0.0, 1e-15);
  s = spherical_from_unit_ray({-1, 0, 0});
  EXPECT_NEAR(s.theta, kPi, 1e-15);
  EXPECT_NEAR(s.phi, 0.0, 1e-15);
  s = spherical_from_unit_ray({0, 1, 0});
  EXPECT_EQ(s.theta, 0.0);
  EXPECT_EQ(s.phi, kPi / 2);
  s = spherical_from_unit_ray({0, -1, 0});
  EXPECT_EQ(s.theta, 0.0);
  EXPECT_EQ(s.phi, -kPi / 2);
}

TEST(SphericalRay, RoundTripRandom) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 v = test::random_unit(rng);
    const Spherical s = spherical_from_unit_ray(v);
    ASSERT_GE(s.theta, 0.0);
    ASSERT_LT(s.theta, kTwoPi);
    ASSERT_LE(std::abs(s.phi), kPi / 2);
    EXPECT_LT((unit_ray_from_spherical(s.theta, s.phi) - v).norm(), 1e-9);
  }
}

TEST(FastAtan2, MatchesLibm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> e(-30.0, 30.0);
  for (int i = 0; i < 200000; ++i) {
    const double y = u(rng) * std::exp2(e(rng)), x = u(rng) * std::exp2(e(rng));
    const double ref = std::atan2(y, x);
    ASSERT_NEAR(fast_atan2(y, x), ref, 4e-16 * std::max(1.0, std::abs(ref))) << y << " " << x;
  }
}

TEST(FastAtan2, SignedZerosAndAxes) {
  for (double y : {0.0, -0.0, 1.0, -1.0})
    for (double x : {0.0, -0.0, 1.0, -1.0}) {
      const double ref = std::atan2(y, x), got = fast_atan2(y, x);
      EXPECT_NEAR(got, ref, 1e-15) << y << " " << x;
      EXPECT_EQ(std::signbit(got), std::signbit(ref)) << y << " " << x;
    }
}

// ---------------------------------------------------------------------------

namespace {

FisheyeCamera test_camera(const Pose& pose = {}) {
  return FisheyeCamera::centered(320, 320, 220.0 * kPi / 180.0, pose);
}

}  // namespace

TEST(Fisheye, CenteredCameraIsValid) {
  const auto cam = test_camera();
  EXPECT_NO_THROW(cam.validate());
  EXPECT_DOUBLE_EQ(cam.image_circle_radius(), 159.5);
}

TEST(Fisheye, ValidateRejectsBadIntrinsics) {
  auto cam = test_camera();
  cam.focal = 0.0;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = test_camera();
  cam.fov_max = kTwoPi;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = test_camera();
  cam.focal *= 1.01;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
  cam = test_camera();
  cam.principal_point.x() += 3.0;
  EXPECT_THROW(cam.validate(), std::invalid_argument);
}

TEST(Fisheye, OnAxisProjectsToPrincipalPoint) {
  std::mt19937_64 rng(4);
  const Pose pose(Vec3(0.1, -0.2, 0.3), test::random_rotation(rng));
  const auto cam = test_camera(pose);
  for (double d : {1e-3, 0.5, 7.0, 1e4}) {
    const PixelProjection p = project_fisheye(cam, pose.apply(Vec3(0, 0, d)));
    EXPECT_TRUE(p.valid);
    EXPECT_NEAR((p.pixel - cam.principal_point).norm(), 0.0, 1e-9);
  }
}

TEST(Fisheye, HalfFovLandsOnImageCircle) {
  const auto cam = test_camera();
  for (double psi : {0.0, 0.7, 2.0, 4.0}) {
    const double a = cam.half_fov();
    const Vec3 p(std::sin(a) * std::cos(psi), std::sin(a) * std::sin(psi), std::cos(a));
    const PixelProjection pr = project_fisheye(cam, 2.5 * p);
    EXPECT_NEAR((pr.pixel - cam.principal_point).norm(), cam.focal * a, 1e-9);
    EXPECT_TRUE(pr.valid);
  }
}

TEST(Fisheye, BeyondFovIsInvalid) {
  const auto cam = test_camera();
  const double a = cam.half_fov() + 1e-3;
  EXPECT_FALSE(project_fisheye(cam, Vec3(std::sin(a), 0, std::cos(a))).valid);
  EXPECT_FALSE(project_fisheye(cam, Vec3(0, 0, -1)).valid);
}

TEST(Fisheye, OpticalCenterIsInvalid) {
  const auto cam = test_camera(Pose(Vec3(0.2, 0, 0), Quat::Identity()));
  EXPECT_FALSE(project_fisheye(cam, Vec3(0.2, 0, 0)).valid);
}

TEST(Fisheye, UnprojectPrincipalPointIsOpticalAxis) {
  std::mt19937_64 rng(5);
  const Pose pose(Vec3(0.3, 0.1, -0.2), test::random_rotation(rng));
  const auto cam = test_camera(pose);
  const Ray r = unproject_fisheye(cam, cam.principal_point);
  EXPECT_LT((r.origin - pose.position).norm(), 1e-15);
  EXPECT_LT((r.dir - pose.rotate(Vec3::UnitZ())).norm(), 1e-12);
}

TEST(Fisheye, UnprojectEdgeIsHalfFov) {
  const auto cam = test_camera();
  for (double psi : {0.0, 1.0, 3.0}) {
    const Vec2 px = cam.principal_point + cam.image_circle_radius() * Vec2(std::cos(psi), std::sin(psi));
    const Ray r = unproject_fisheye(cam, px);
    EXPECT_NEAR(test::angle_between(r.dir, Vec3::UnitZ()), cam.half_fov(), 1e-12);
  }
}

TEST(Fisheye, UnprojectOutsideCircleThrows) {
  const auto cam = test_camera();
  EXPECT_THROW(unproject_fisheye(cam, {0.0, 0.0}), std::domain_error);
}

TEST(Fisheye, PixelRoundTrip) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& cam : make_rig()) {
    for (int i = 0; i < 2500; ++i) {
      const double r = cam.image_circle_radius() * std::sqrt(u(rng)), psi = kTwoPi * u(rng);
      const Vec2 px = cam.principal_point + r * Vec2(std::cos(psi), std::sin(psi));
      const Ray ray = unproject_fisheye(cam, px);
      for (double t : {0.05, 1.0, 40.0}) {
        const PixelProjection p = project_fisheye(cam, ray.at(t));
        ASSERT_TRUE(p.valid);
        ASSERT_LT((p.pixel - px).norm(), 0.01);
      }
    }
  }
}

TEST(Fisheye, DirectionRoundTrip) {
  std::mt19937_64 rng(7);
  const auto rig = make_rig();
  int checked = 0;
  while (checked < 10000) {
    const auto& cam = rig[checked % rig.size()];
    const Vec3 dir = test::random_unit(rng);
    const Vec3 point = cam.pose_rig_from_cam.position + 3.0 * dir;
    const PixelProjection p = project_fisheye(cam, point);
    if (!p.valid) continue;
    const Ray r = unproject_fisheye(cam, p.pixel);
    ASSERT_LT(test::angle_between(r.dir, dir), 1e-6);
    ++checked;
  }
}

TEST(Rig, DefaultLayout) {
  const auto rig = make_rig();
  ASSERT_EQ(rig.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    const auto& cam = rig[k];
    EXPECT_NO_THROW(cam.validate());
    EXPECT_NEAR(cam.pose_rig_from_cam.position.norm(), 0.2, 1e-15);
    const Vec3 axis = cam.pose_rig_from_cam.rotate(Vec3::UnitZ());
    EXPECT_LT((axis - unit_ray_from_spherical(kPi / 2 * k, 0.0)).norm(), 1e-12);
    // Image +y points down in the rig frame.
    EXPECT_LT((cam.pose_rig_from_cam.rotate(Vec3::UnitY()) - Vec3(0, -1, 0)).norm(), 1e-12);
    EXPECT_NEAR(cam.fov_max, 220.0 * kPi / 180.0, 1e-15);
  }
}

TEST(Pose, ApplyInverse) {
  std::mt19937_64 rng(8);
  const Pose p(Vec3(1, 2, 3), test::random_rotation(rng));
  EXPECT_NEAR(p.orientation.norm(), 1.0, 1e-12);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = test::random_in_ball(rng, 5.0);
    EXPECT_LT((p.apply_inverse(p.apply(x)) - x).norm(), 1e-12);
  }
}

// ---------------------------------------------------------------------------

TEST(Equirect, PixelCenters) {
  const Spherical s = equirect_dir(17, 9, 8, 4);
  EXPECT_NEAR(s.theta, kPi, 1e-15);
  EXPECT_NEAR(s.phi, 0.0, 1e-15);
  const Spherical top = equirect_dir(256, 128, 0, 0);
  EXPECT_LT(top.phi, kPi / 2);
  EXPECT_NEAR(top.phi, kPi / 2 - kPi / 256, 1e-15);
  EXPECT_NEAR(top.theta, kPi / 256, 1e-15);
}

TEST(Equirect, RoundTripAllPixels) {
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u) {
      const Spherical s = equirect_dir(16, 8, u, v);
      const Vec2 px = equirect_pixel(16, 8, s.theta, s.phi);
      EXPECT_NEAR(px.x(), u, 1e-12);
      EXPECT_NEAR(px.y(), v, 1e-12);
      const Spherical back = spherical_from_unit_ray(unit_ray_from_spherical(s.theta, s.phi));
      EXPECT_NEAR(back.theta, s.theta, 1e-12);
      EXPECT_NEAR(back.phi, s.phi, 1e-12);
    }
}

// ---------------------------------------------------------------------------

TEST(Schedule, Defaults) {
  const SphereSchedule s;
  const auto r = sphere_layer_radii(s);
  ASSERT_EQ(r.size(), 64u);
  EXPECT_DOUBLE_EQ(s.inverse_depth(63), 2.0);
  EXPECT_DOUBLE_EQ(r[63], 0.5);
  EXPECT_DOUBLE_EQ(r[0], 1000.0);
  for (std::size_t n = 1; n < r.size(); ++n) EXPECT_LT(r[n], r[n - 1]);
}

TEST(Schedule, ThreeLayers) {
  const SphereSchedule s{3, 2.0, 1e-3};
  EXPECT_DOUBLE_EQ(s.inverse_depth(0), 1e-3);
  EXPECT_DOUBLE_EQ(s.inverse_depth(1), 1.0);
  EXPECT_DOUBLE_EQ(s.inverse_depth(2), 2.0);
}

TEST(Schedule, Validation) {
  EXPECT_THROW((SphereSchedule{1, 2.0, 1e-3}.validate()), std::invalid_argument);
  EXPECT_THROW((SphereSchedule{4, 1e-4, 1e-3}.validate()), std::invalid_argument);
  EXPECT_THROW((SphereSchedule{4, 2.0, 0.0}.validate()), std::invalid_argument);
}

// ---------------------------------------------------------------------------

namespace {

// Bisection on |o + t d| - R over [0, 2R + |o|].
double bisect_sphere(const Ray& r, double R) {
  double lo = 0.0, hi = 2.0 * R + r.origin.norm();
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (r.at(mid).norm() < R ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(IntersectSphere, Centered) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const Ray r{Vec3::Zero(), test::random_unit(rng)};
    for (double R : {0.5, 1.0, 1000.0}) EXPECT_NEAR(*intersect_sphere(r, R), R, 1e-12 * R);
  }
}

TEST(IntersectSphere, OneDimensional) {
  const Ray r{Vec3(0.1, 0, 0), Vec3(1, 0, 0)};
  const auto z = intersect_sphere(r, 0.5);
  ASSERT_TRUE(z);
  EXPECT_NEAR(*z, 0.4, 1e-15);
  EXPECT_NEAR(bisect_sphere(r, 0.5), 0.4, 1e-12);
  EXPECT_NEAR(*intersect_sphere({Vec3(0.1, 0, 0), Vec3(-1, 0, 0)}, 0.5), 0.6, 1e-15);
}

TEST(IntersectSphere, OutsideIsEmpty) {
  EXPECT_FALSE(intersect_sphere({Vec3(0.6, 0, 0), Vec3(-1, 0, 0)}, 0.5));
  EXPECT_FALSE(intersect_sphere({Vec3(0, 0.5, 0), Vec3(0, 1, 0)}, 0.5));
}

TEST(IntersectSphere, ResidualAndMonotonic) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto radii = sphere_layer_radii(SphereSchedule{});
  for (int i = 0; i < 10000; ++i) {
    const Ray r{test::random_in_ball(rng, 0.49), test::random_unit(rng)};
    double prev = -1.0;
    for (auto it = radii.rbegin(); it != radii.rend(); ++it) {
      const auto z = intersect_sphere(r, *it);
      ASSERT_TRUE(z);
      ASSERT_GT(*z, 0.0);
      ASSERT_LT(std::abs(r.at(*z).norm() - *it), 1e-7);
      ASSERT_GT(*z, prev);
      prev = *z;
    }
    const double R = 0.05 + 3.0 * u(rng);
    if (const auto z = intersect_sphere(r, R)) {
      EXPECT_NEAR(*z, bisect_sphere(r, R), 1e-9 * std::max(1.0, R));
    }
  }
}

TEST(IntersectSphere, ConditionMatchesDiscriminantOracle) {
  // A forward root exists with c < 0 exactly when the product of the roots
  // is negative, i.e. the origin is strictly inside.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const Ray r{test::random_in_ball(rng, 2.0), test::random_unit(rng)};
    const double R = 2.0 * u(rng) + 1e-3;
    const double a = 1.0, b = 2.0 * r.dir.dot(r.origin), c = r.origin.squaredNorm() - R * R;
    const double disc = b * b - 4 * a * c;
    const bool oracle = c < 0.0 && disc > 0.0;
    EXPECT_EQ(intersect_sphere(r, R).has_value(), oracle);
  }
}
