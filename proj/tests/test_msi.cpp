#include <gtest/gtest.h>

#include <random>

#include "omsi/msi.hpp"
#include "omsi/scene.hpp"
#include "support.hpp"

using namespace omsi;

namespace {

SourceViews render_sources(const SceneDesc& scene, const std::vector<FisheyeCamera>& rig) {
  SourceViews src;
  src.cameras = rig;
  for (const auto& cam : rig) {
    auto r = render_fisheye_gt(scene, cam, 2);
    src.images.push_back(std::move(r.rgb));
    src.valid.push_back(std::move(r.valid));
  }
  return src;
}

SceneDesc enclosing(double radius, const Texture& tex) {
  SceneDesc s;
  s.primitives.push_back({SphereShape{Vec3::Zero(), radius}, tex});
  return s;
}

MsiGrid<double> random_grid(int layers, int h, int w, std::uint64_t seed) {
  MsiGrid<double> g(SphereSchedule{layers, 2.0, 1e-3}, h, w);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& x : g.occ_logit) x = n(rng);
  for (auto& x : g.color_logit) x = n(rng);
  return g;
}

}  // namespace

TEST(Sweep, SolidEnclosingSphere) {
  const Rgb color(0.3, 0.7, 0.2);
  const auto rig = make_rig(RigConfig{96, 96});
  const SourceViews src = render_sources(enclosing(5.0, SolidTexture{color}), rig);
  const auto grid = sphere_sweep<double>(src, SphereSchedule{4, 2.0, 1e-3}, 16, 32, 2);
  ASSERT_EQ(grid.n_cameras, 4);
  std::size_t valid = 0;
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell)
    for (int k = 0; k < 4; ++k) {
      if (!grid.swept_valid[cell * 4 + k]) continue;
      ++valid;
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(grid.swept_rgb[(cell * 4 + k) * 3 + c], color[c], 1e-6);
    }
  EXPECT_GT(valid, grid.cell_count());
}

TEST(Sweep, CellOutsideEveryFov) {
  // One forward camera with a 90 degree field of view.
  const auto cam = FisheyeCamera::centered(64, 64, kPi / 2, outward_pose(0.0, 0.2));
  const SourceViews src = render_sources(enclosing(5.0, SolidTexture{}), {cam});
  const auto grid = sphere_sweep<double>(src, SphereSchedule{4, 2.0, 1e-3}, 16, 32, 1);
  // theta = pi lies straight behind the camera.
  const int u = 15, v = 8;
  for (int n = 0; n < 4; ++n) EXPECT_EQ(grid.swept_valid[grid.cell_index(n, v, u)], 0);
  EXPECT_EQ(grid.swept_valid[grid.cell_index(2, 8, 0)], 1);
}

TEST(Sweep, MatchesPointwiseOracle) {
  const auto rig = make_rig(RigConfig{80, 80});
  const SourceViews src = render_sources(make_room_scene(4), rig);
  const auto grid = sphere_sweep<double>(src, SphereSchedule{8, 2.0, 1e-3}, 16, 32, 2);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const int n = static_cast<int>(rng() % 8), v = static_cast<int>(rng() % 16), u = static_cast<int>(rng() % 32);
    const Spherical s = equirect_dir(32, 16, u, v);
    const Vec3 p = unit_ray_from_spherical(s.theta, s.phi) / grid.schedule.inverse_depth(n);
    const std::size_t cell = grid.cell_index(n, v, u);
    for (int k = 0; k < 4; ++k) {
      const PixelProjection pr = project_fisheye(rig[k], p);
      const ProjectedColor pc = sample_fisheye(src.images[k], src.valid[k], pr);
      ASSERT_EQ(grid.swept_valid[cell * 4 + k] != 0, pc.valid);
      if (!pc.valid) continue;
      const auto ref = sample_bilinear(src.images[k], pr.pixel.x(), pr.pixel.y());
      for (int c = 0; c < 3; ++c) EXPECT_EQ(grid.swept_rgb[(cell * 4 + k) * 3 + c], static_cast<float>(ref[c]));
    }
  }
}

TEST(Sweep, CameraPermutationEquivariance) {
  const auto rig = make_rig(RigConfig{64, 64});
  const SourceViews src = render_sources(make_room_scene(6), rig);
  const std::array<int, 4> perm{2, 0, 3, 1};
  SourceViews p;
  for (int k : perm) {
    p.cameras.push_back(src.cameras[k]);
    p.images.push_back(src.images[k]);
    p.valid.push_back(src.valid[k]);
  }
  const auto a = sphere_sweep<float>(src, SphereSchedule{6, 2.0, 1e-3}, 8, 16, 1);
  const auto b = sphere_sweep<float>(p, SphereSchedule{6, 2.0, 1e-3}, 8, 16, 2);
  for (std::size_t cell = 0; cell < a.cell_count(); ++cell)
    for (int j = 0; j < 4; ++j) {
      const int k = perm[j];
      ASSERT_EQ(b.swept_valid[cell * 4 + j], a.swept_valid[cell * 4 + k]);
      for (int c = 0; c < 3; ++c) ASSERT_EQ(b.swept_rgb[(cell * 4 + j) * 3 + c], a.swept_rgb[(cell * 4 + k) * 3 + c]);
    }
  for (std::size_t i = 0; i < a.swept_stats.size(); ++i) EXPECT_NEAR(a.swept_stats[i], b.swept_stats[i], 1e-6);
}

TEST(Sweep, PhotoConsistencyOnTrueLayer) {
  // Surface exactly on layer 1 (radius 1.5) with a smooth texture.
  const auto rig = make_rig();
  const SourceViews src =
      render_sources(enclosing(1.5, AxisGradientTexture{Rgb(0.1, 0.2, 0.3), Rgb(0.9, 0.8, 0.6), 1, -1.5, 1.5}), rig);
  const auto grid = sphere_sweep<double>(src, SphereSchedule{4, 2.0, 1e-3}, 32, 64, 2);
  ASSERT_DOUBLE_EQ(grid.schedule.radius(1), 1.5);
  int multi = 0;
  for (int v = 0; v < 32; ++v)
    for (int u = 0; u < 64; ++u) {
      const std::size_t cell = grid.cell_index(1, v, u);
      std::vector<int> seen;
      for (int k = 0; k < 4; ++k)
        if (grid.swept_valid[cell * 4 + k]) seen.push_back(k);
      if (seen.size() < 2) continue;
      ++multi;
      for (std::size_t i = 1; i < seen.size(); ++i)
        for (int c = 0; c < 3; ++c)
          EXPECT_NEAR(grid.swept_rgb[(cell * 4 + seen[i]) * 3 + c], grid.swept_rgb[(cell * 4 + seen[0]) * 3 + c],
                      2.0 / 255.0);
    }
  EXPECT_GT(multi, 64 * 32 / 2);
}

TEST(Sweep, RejectsMismatchedImages) {
  SourceViews src;
  src.cameras = {FisheyeCamera::centered(32, 32, kPi, {})};
  src.images = {ImageRGB(16, 16)};
  src.valid = {Mask(256, 1)};
  EXPECT_THROW(sphere_sweep<float>(src, SphereSchedule{}, 8, 16, 1), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(LayerSample, ExactAtNodes) {
  const auto g = random_grid(3, 8, 16, 2);
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 16; ++u) {
      const Spherical s = equirect_dir(16, 8, u, v);
      const LayerSample ls = sample_layer_bilinear(g, 1, s.theta, s.phi);
      EXPECT_NEAR(ls.occ_logit, g.occ_logit[g.cell_index(1, v, u)], 1e-12);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(ls.color_logit[c], g.color_logit[g.cell_index(1, v, u) * 3 + c], 1e-12);
    }
}

TEST(LayerSample, MidwayIsMean) {
  const auto g = random_grid(2, 8, 16, 3);
  const Spherical a = equirect_dir(16, 8, 4, 3), b = equirect_dir(16, 8, 5, 3);
  const LayerSample ls = sample_layer_bilinear(g, 0, 0.5 * (a.theta + b.theta), a.phi);
  EXPECT_NEAR(ls.occ_logit, 0.5 * (g.occ_logit[g.cell_index(0, 3, 4)] + g.occ_logit[g.cell_index(0, 3, 5)]), 1e-12);
}

TEST(LayerSample, SeamMatchesPaddedGrid) {
  const int W = 16, H = 8;
  const auto g = random_grid(2, H, W, 4);
  // Padded oracle: column W is a copy of column 0.
  const auto padded = [&](double x, double y) {
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const double fx = x - x0, fy = y - y0;
    const auto at = [&](int u, int v) { return g.occ_logit[g.cell_index(0, v, u % W)]; };
    return (1 - fy) * ((1 - fx) * at(x0, y0) + fx * at(x0 + 1, y0)) +
           fy * ((1 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1));
  };
  for (double delta : {1e-6, 0.01, 0.1, 0.19}) {
    const double theta = kTwoPi - delta, phi = 0.3;
    const Vec2 px = equirect_pixel(W, H, theta, phi);
    ASSERT_GT(px.x(), W - 1.0);
    EXPECT_NEAR(sample_layer_bilinear(g, 0, theta, phi).occ_logit, padded(px.x(), px.y()), 1e-12);
  }
  // Continuity across the seam.
  const double left = sample_layer_bilinear(g, 0, kTwoPi - 1e-9, 0.1).occ_logit;
  const double right = sample_layer_bilinear(g, 0, 1e-9, 0.1).occ_logit;
  EXPECT_NEAR(left, right, 1e-6);
}

TEST(LayerSample, ClampedAtPoles) {
  const auto g = random_grid(2, 8, 16, 5);
  const Spherical top = equirect_dir(16, 8, 6, 0);
  EXPECT_NEAR(sample_layer_bilinear(g, 0, top.theta, kPi / 2).occ_logit, g.occ_logit[g.cell_index(0, 0, 6)], 1e-12);
  const Spherical bottom = equirect_dir(16, 8, 6, 7);
  EXPECT_NEAR(sample_layer_bilinear(g, 0, bottom.theta, -kPi / 2).occ_logit, g.occ_logit[g.cell_index(0, 7, 6)],
              1e-12);
}

TEST(LayerSample, BoundedByNodes) {
  const auto g = random_grid(2, 8, 16, 6);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> th(0.0, kTwoPi), ph(-kPi / 2, kPi / 2);
  for (int i = 0; i < 5000; ++i) {
    const LayerSample ls = sample_layer_bilinear(g, 1, th(rng), ph(rng));
    double lo = 1e300, hi = -1e300, wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double x = g.occ_logit[g.layer_cells() + ls.stencil.cell[k]];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      ASSERT_GE(ls.stencil.weight[k], 0.0);
      wsum += ls.stencil.weight[k];
    }
    ASSERT_NEAR(wsum, 1.0, 1e-12);
    ASSERT_GE(ls.occ_logit, lo - 1e-12);
    ASSERT_LE(ls.occ_logit, hi + 1e-12);
  }
}

TEST(LayerSample, LayerOutOfRange) {
  const auto g = random_grid(2, 4, 8, 8);
  EXPECT_THROW(sample_layer_bilinear(g, 2, 0.0, 0.0), std::out_of_range);
}

// ---------------------------------------------------------------------------

TEST(ProjectColors, VisibleOnlyToCameraZero) {
  RigConfig rc{64, 64, 120.0 * kPi / 180.0};
  const auto rig = make_rig(rc);
  const SourceViews src = render_sources(enclosing(6.0, SolidTexture{Rgb(0.4, 0.5, 0.6)}), rig);
  const auto pc = project_colors(src, Vec3(3, 0, 0));
  ASSERT_EQ(pc.size(), 4u);
  EXPECT_TRUE(pc[0].valid);
  EXPECT_FALSE(pc[1].valid);
  EXPECT_FALSE(pc[2].valid);
  EXPECT_FALSE(pc[3].valid);
  EXPECT_NEAR(pc[0].rgb[1], 0.5, 1e-6);
}

TEST(ProjectColors, WallSeenByTwoCameras) {
  SceneDesc s;
  s.primitives.push_back({PlaneShape{Vec3::UnitX(), 2.0, 4.0}, SolidTexture{Rgb(0.8, 0.1, 0.4)}});
  s.primitives.push_back({SphereShape{Vec3::Zero(), 8.0}, SolidTexture{Rgb(0.0, 0.0, 0.0)}});
  const auto rig = make_rig(RigConfig{128, 128});
  const SourceViews src = render_sources(s, rig);
  const auto pc = project_colors(src, Vec3(2.0, 0.1, 0.6));
  ASSERT_TRUE(pc[0].valid);
  ASSERT_TRUE(pc[1].valid);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(pc[0].rgb[c], pc[1].rgb[c], 1.0 / 255.0);
}

TEST(ProjectColors, BehindEveryCamera) {
  const auto cam = FisheyeCamera::centered(64, 64, kPi / 2, outward_pose(0.0, 0.2));
  const SourceViews src = render_sources(enclosing(5.0, SolidTexture{}), {cam});
  const auto pc = project_colors(src, Vec3(-2, 0, 0));
  ASSERT_EQ(pc.size(), 1u);
  EXPECT_FALSE(pc[0].valid);
  EXPECT_EQ(pc[0].rgb, (std::array<double, 3>{0, 0, 0}));
}

// ---------------------------------------------------------------------------

TEST(InitLearnable, AgreeingCamerasAndDefaults) {
  const Rgb color(0.25, 0.5, 0.9);
  const auto cam = FisheyeCamera::centered(64, 64, kPi / 2, outward_pose(0.0, 0.2));
  const SourceViews src = render_sources(enclosing(5.0, SolidTexture{color}), {cam, cam});
  auto grid = sphere_sweep<double>(src, SphereSchedule{4, 2.0, 1e-3}, 16, 32, 1);
  init_learnable(grid);
  for (std::size_t cell = 0; cell < grid.cell_count(); ++cell) {
    EXPECT_NEAR(sigmoid(grid.occ_logit[cell]), 0.1192, 1e-4);
    const bool any = grid.swept_valid[cell * 2] || grid.swept_valid[cell * 2 + 1];
    for (int c = 0; c < 3; ++c) {
      const double got = sigmoid(grid.color_logit[cell * 3 + c]);
      EXPECT_NEAR(got, any ? color[c] : 0.5, any ? 1.0 / 255.0 : 1e-15);
    }
  }
}

TEST(InitLearnable, ClampsExtremes) {
  const auto cam = FisheyeCamera::centered(64, 64, kPi / 2, outward_pose(0.0, 0.2));
  const SourceViews src = render_sources(enclosing(5.0, SolidTexture{Rgb(0, 1, 0)}), {cam});
  auto grid = sphere_sweep<double>(src, SphereSchedule{4, 2.0, 1e-3}, 16, 32, 1);
  init_learnable(grid);
  const std::size_t cell = grid.cell_index(2, 8, 0);
  ASSERT_TRUE(grid.swept_valid[cell]);
  EXPECT_NEAR(grid.color_logit[cell * 3], logit(1.0 / 510.0), 1e-9);
  EXPECT_NEAR(grid.color_logit[cell * 3 + 1], logit(1.0 - 1.0 / 510.0), 1e-9);
}

TEST(MsiGrid, ShapeAndCast) {
  MsiGrid<double> g(SphereSchedule{5, 2.0, 1e-3}, 4, 8);
  EXPECT_EQ(g.cell_count(), 5u * 32u);
  EXPECT_EQ(g.parameter_count(), 5u * 32u * 4u);
  EXPECT_FALSE(g.has_swept());
  EXPECT_NEAR(g.cell_point(4, 0, 0).norm(), 0.5, 1e-15);
  g.occ_logit[7] = 1.25;
  const MsiGrid<float> f = g.cast<float>();
  EXPECT_EQ(f.occ_logit[7], 1.25f);
  EXPECT_THROW((MsiGrid<float>(SphereSchedule{5, 2.0, 1e-3}, 0, 8)), std::invalid_argument);
}
