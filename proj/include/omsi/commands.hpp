#pragma once

// Implementations behind the omsi command-line subcommands.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "omsi/artifact.hpp"
#include "omsi/config.hpp"
#include "omsi/metrics.hpp"
#include "omsi/msi.hpp"
#include "omsi/optim.hpp"
#include "omsi/render.hpp"
#include "omsi/scene.hpp"

namespace omsi {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2 };

inline constexpr int kDefaultPanoWidth = 256;
inline constexpr int kDefaultPanoHeight = 128;

/// Rounds schedule bounds to float so that a saved artifact reproduces the
/// in-memory layer radii exactly.
inline SphereSchedule float_exact(SphereSchedule s) {
  s.d_inv_max = static_cast<float>(s.d_inv_max);
  s.eps_background = static_cast<float>(s.eps_background);
  return s;
}

/// Translated viewpoints inside the rig's neighborhood used for novel-view
/// evaluation.
inline std::vector<Pose> default_heldout_poses() {
  return {Pose({0.10, 0.00, 0.05}, Quat::Identity()), Pose({-0.06, 0.04, 0.10}, Quat::Identity()),
          Pose({0.02, -0.05, -0.12}, Quat(Eigen::AngleAxisd(0.4, Vec3::UnitY())))};
}

struct GenOptions {
  std::string scene_path;  // empty: procedural room from seed
  std::string rig_path;    // empty: default rig
  std::filesystem::path out;
  int pano_width = kDefaultPanoWidth;
  int pano_height = kDefaultPanoHeight;
  std::uint64_t seed = 0;
  int threads = default_thread_count();
};

inline SampleBundle cmd_gen(const GenOptions& o) {
  const SceneDesc scene = o.scene_path.empty() ? make_room_scene(o.seed) : load_scene(o.scene_path);
  const auto rig = o.rig_path.empty() ? make_rig() : load_rig(o.rig_path);
  SampleBundle b = generate_bundle(scene, rig, o.pano_width, o.pano_height, true, o.threads);
  save_bundle(b, o.out);
  return b;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history,
                           const TrainConfig& cfg) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# lambda_d=" << cfg.lambda_d << " lr=" << cfg.lr << " grid_lr=" << cfg.grid_lr
      << " iterations=" << cfg.iterations << " seed=" << cfg.seed << "\n";
  out << "iteration,L,L_color,L_depth\n";
  out << std::setprecision(9);
  for (const auto& r : history)
    out << r.iteration << ',' << r.loss.total << ',' << r.loss.color << ',' << r.loss.depth << '\n';
}

struct FitOutput {
  Artifact artifact;
  std::vector<LossRecord> history;
};

/// Sweep, initialize and fit; writes model.msi and loss.csv to cfg.out.
inline FitOutput cmd_fit(const SampleBundle& bundle, const RunConfig& cfg, const FitOptions& fit_opts = {}) {
  const SourceViews sources = source_views(bundle);
  FitOutput res;
  res.artifact.grid =
      sphere_sweep<float>(sources, float_exact(cfg.schedule()), cfg.msi_height, cfg.msi_width, cfg.train.threads);
  init_learnable(res.artifact.grid);
  if (cfg.backend == "mlp") {
    MlpConfig mc;
    mc.n_cameras = static_cast<int>(sources.size());
    res.artifact.params = FieldParams::make_mlp(mc, cfg.seed);
    res.artifact.sources = sources;
  } else if (cfg.backend != "explicit") {
    throw ConfigError("unknown backend '" + cfg.backend + "'");
  }
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  res.history = fit(bundle, res.artifact.grid, res.artifact.params, tc, fit_opts);
  round_params_to_float(res.artifact.params);
  round_sources_to_float(res.artifact.sources);
  std::filesystem::create_directories(cfg.out);
  save_artifact(std::filesystem::path(cfg.out) / "model.msi", res.artifact, cfg.backend == "mlp");
  write_loss_csv(std::filesystem::path(cfg.out) / "loss.csv", res.history, tc);
  return res;
}

/// One pose per non-empty line ("px,py,pz,qw,qx,qy,qz"); '#' starts a comment.
inline std::vector<Pose> load_pose_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pose file " + path.string());
  std::vector<Pose> poses;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (!line.empty()) poses.push_back(parse_pose(line));
  }
  return poses;
}

/// Writes rgb_<i>.png, inv_depth_<i>.pfm and acc_<i>.png per pose.
inline std::vector<RenderedView> cmd_render(const Artifact& a, const std::vector<Pose>& poses,
                                            const ViewTarget& target, const std::filesystem::path& out,
                                            int threads = default_thread_count()) {
  std::filesystem::create_directories(out);
  std::vector<RenderedView> views;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    RenderedView v = render_view(a.params, a.grid, a.sources_or_null(), target, poses[i], threads);
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03zu", i);
    write_png(out / ("rgb_" + std::string(idx) + ".png"), v.rgb);
    write_pfm(out / ("inv_depth_" + std::string(idx) + ".pfm"), v.inv_depth);
    write_png(out / ("acc_" + std::string(idx) + ".png"), v.acc);
    views.push_back(std::move(v));
  }
  return views;
}

struct EvalReport {
  DepthReport depth;
  ImageReport image;
  std::vector<ImageReport> per_view;
};

/// Identity-pose panorama depth against the bundle ground truth, and
/// held-out equirect views against the scene oracle.
inline EvalReport evaluate(const Artifact& a, const SampleBundle& bundle, const std::vector<Pose>& heldout,
                           int threads = default_thread_count()) {
  EvalReport r;
  const int w = bundle.gt_inv_depth.width, h = bundle.gt_inv_depth.height;
  const RenderedView center =
      render_view(a.params, a.grid, a.sources_or_null(), ViewTarget::equirect(w, h), Pose::identity(), threads);
  r.depth = depth_metrics(center.inv_depth, bundle.gt_inv_depth, finite_depth_mask(bundle.gt_inv_depth));
  if (!heldout.empty()) {
    if (!bundle.scene) throw ConfigError("eval: bundle has no scene description for held-out views");
    for (const Pose& p : heldout) {
      const ImageRGB truth = render_panorama_rgb_gt(*bundle.scene, w, h, p, threads);
      const RenderedView v = render_view(a.params, a.grid, a.sources_or_null(), ViewTarget::equirect(w, h), p, threads);
      const ImageReport ir{psnr(v.rgb, truth), ssim(v.rgb, truth)};
      r.per_view.push_back(ir);
      r.image.psnr += ir.psnr / static_cast<double>(heldout.size());
      r.image.ssim += ir.ssim / static_cast<double>(heldout.size());
    }
  }
  return r;
}

inline std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(9);
  os << "depth_mae=" << r.depth.mae << "\n"
     << "depth_rmse=" << r.depth.rmse << "\n"
     << "depth_gt_0.1_pct=" << r.depth.ratio_gt_0_1 << "\n"
     << "depth_gt_0.3_pct=" << r.depth.ratio_gt_0_3 << "\n"
     << "depth_gt_0.5_pct=" << r.depth.ratio_gt_0_5 << "\n"
     << "psnr=" << r.image.psnr << "\n"
     << "ssim=" << r.image.ssim << "\n";
  return os.str();
}

inline EvalReport cmd_eval(const Artifact& a, const SampleBundle& bundle, const std::vector<Pose>& heldout,
                           const std::filesystem::path& out, int threads = default_thread_count()) {
  const EvalReport r = evaluate(a, bundle, heldout, threads);
  std::filesystem::create_directories(out);
  detail::write_text_file(out / "report.txt", format_report(r));
  std::ostringstream csv;
  csv << std::setprecision(9)
      << "depth_mae,depth_rmse,depth_gt_0.1_pct,depth_gt_0.3_pct,depth_gt_0.5_pct,psnr,ssim\n"
      << r.depth.mae << ',' << r.depth.rmse << ',' << r.depth.ratio_gt_0_1 << ',' << r.depth.ratio_gt_0_3 << ','
      << r.depth.ratio_gt_0_5 << ',' << r.image.psnr << ',' << r.image.ssim << '\n';
  detail::write_text_file(out / "report.csv", csv.str());
  return r;
}

}  // namespace omsi
