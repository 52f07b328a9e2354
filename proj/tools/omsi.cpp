// omsi: generate bundles, fit, render, evaluate and serve multi-sphere radiance fields.

#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "omsi/commands.hpp"
#include "omsi/service.hpp"

namespace {

void parse_msi_size(const std::string& s, omsi::RunConfig& cfg) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw omsi::ConfigError("--msi-size must be WxH");
  cfg.msi_width = std::stoi(s.substr(0, x));
  cfg.msi_height = std::stoi(s.substr(x + 1));
  if (cfg.msi_width <= 0 || cfg.msi_height <= 0) throw omsi::ConfigError("--msi-size must be positive");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Omnidirectional multi-sphere radiance fields from four fisheye images"};
  app.require_subcommand(1);

  std::string scene, rig, out = "out", bundle_dir, config_path, artifact_path, pose_text = "0,0,0,1,0,0,0", poses_path;
  std::string target_text = "equirect", msi_size, backend;
  int layers = 0, iters = -1, threads = omsi::default_thread_count(), port = 8080, rays = 0;
  double d_inv_max = 0, lambda_d = -1, lr = 0, grid_lr = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int pano_w = omsi::kDefaultPanoWidth, pano_h = omsi::kDefaultPanoHeight;

  auto* gen = app.add_subcommand("gen", "Render a synthetic bundle (4 fisheyes + ground-truth depth)");
  gen->add_option("--scene", scene, "Scene JSON (default: procedural room from --seed)");
  gen->add_option("--rig", rig, "Rig JSON (default: 4 x 220 deg on a 0.4 m circle)");
  gen->add_option("--out", out, "Output bundle directory")->required();
  gen->add_option("--seed", seed, "Procedural room seed");
  gen->add_option("--pano-width", pano_w);
  gen->add_option("--pano-height", pano_h);

  auto* fitc = app.add_subcommand("fit", "Sweep, initialize and fit a bundle");
  fitc->add_option("--bundle", bundle_dir, "Bundle directory")->required();
  fitc->add_option("--config", config_path, "Run configuration JSON");
  fitc->add_option("--out", out, "Output directory");
  fitc->add_option("--layers", layers);
  fitc->add_option("--msi-size", msi_size, "WxH");
  fitc->add_option("--d-inv-max", d_inv_max);
  fitc->add_option("--lambda-d", lambda_d);
  fitc->add_option("--lr", lr, "Learning rate for MLP weights");
  fitc->add_option("--grid-lr", grid_lr, "Learning rate for explicit grid logits");
  fitc->add_option("--iters", iters);
  fitc->add_option("--rays", rays, "Rays per stream (fisheye and panorama)");
  fitc->add_option("--backend", backend, "explicit | mlp");
  auto* seed_opt = fitc->add_option("--seed", seed);

  auto* renderc = app.add_subcommand("render", "Render views from a fitted artifact");
  renderc->add_option("--artifact", artifact_path)->required();
  renderc->add_option("--pose", pose_text, "px,py,pz,qw,qx,qy,qz");
  renderc->add_option("--poses", poses_path, "File with one pose per line");
  renderc->add_option("--target", target_text, "equirect[:WxH] | fisheye:K | pinhole:WxH:FOV");
  renderc->add_option("--rig", rig, "Rig JSON for fisheye targets");
  renderc->add_option("--out", out);

  auto* evalc = app.add_subcommand("eval", "Depth and novel-view metrics against ground truth");
  evalc->add_option("--artifact", artifact_path)->required();
  evalc->add_option("--bundle", bundle_dir)->required();
  evalc->add_option("--poses", poses_path, "Held-out poses (default: built-in set)");
  evalc->add_option("--out", out);

  auto* serve = app.add_subcommand("serve", "HTTP render service (bind address from OMSI_BIND)");
  serve->add_option("--artifact", artifact_path);
  serve->add_option("--port", port);

  for (auto* sc : {gen, fitc, renderc, evalc, serve}) sc->add_option("--threads", threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? omsi::kExitOk : omsi::kExitUsage;
  }
  seed_set = seed_opt->count() > 0;

  try {
    if (*gen) {
      omsi::GenOptions o{scene, rig, out, pano_w, pano_h, seed, threads};
      omsi::cmd_gen(o);
      std::cout << "wrote bundle to " << out << "\n";
    } else if (*fitc) {
      omsi::RunConfig cfg;
      if (!config_path.empty()) omsi::apply_run_config_json(omsi::detail::read_json_file(config_path), cfg);
      if (fitc->count("--out")) cfg.out = out;
      if (layers) cfg.layers = layers;
      if (!msi_size.empty()) parse_msi_size(msi_size, cfg);
      if (d_inv_max > 0) cfg.d_inv_max = d_inv_max;
      if (lambda_d >= 0) cfg.train.lambda_d = lambda_d;
      if (lr > 0) cfg.train.lr = lr;
      if (grid_lr > 0) cfg.train.grid_lr = grid_lr;
      if (iters >= 0) cfg.train.iterations = iters;
      if (rays > 0) cfg.train.n_fisheye_rays = cfg.train.n_panorama_rays = rays;
      if (!backend.empty()) cfg.backend = backend;
      if (seed_set) cfg.seed = seed;
      cfg.train.threads = threads;
      const omsi::SampleBundle b = omsi::load_bundle(bundle_dir);
      omsi::FitOptions fo;
      const int every = std::max(1, cfg.train.iterations / 20);
      fo.on_iteration = [every](const omsi::LossRecord& r) {
        if (r.iteration % every == 0)
          std::cout << "iter " << r.iteration << " L=" << r.loss.total << " L_color=" << r.loss.color
                    << " L_depth=" << r.loss.depth << std::endl;
      };
      const auto res = omsi::cmd_fit(b, cfg, fo);
      std::cout << "final L=" << res.history.back().loss.total << "; wrote " << cfg.out << "/model.msi\n";
    } else if (*renderc) {
      const omsi::Artifact a = omsi::load_artifact(artifact_path);
      std::vector<omsi::Pose> poses =
          poses_path.empty() ? std::vector<omsi::Pose>{omsi::parse_pose(pose_text)} : omsi::load_pose_file(poses_path);
      std::vector<omsi::FisheyeCamera> cams =
          !rig.empty() ? omsi::load_rig(rig) : (a.sources.size() ? a.sources.cameras : omsi::make_rig());
      const omsi::ViewTarget t = omsi::parse_target(target_text, cams, omsi::kDefaultPanoWidth, omsi::kDefaultPanoHeight);
      omsi::cmd_render(a, poses, t, out, threads);
      std::cout << "rendered " << poses.size() << " view(s) to " << out << "\n";
    } else if (*evalc) {
      const omsi::Artifact a = omsi::load_artifact(artifact_path);
      const omsi::SampleBundle b = omsi::load_bundle(bundle_dir);
      const auto poses = poses_path.empty() ? omsi::default_heldout_poses() : omsi::load_pose_file(poses_path);
      std::cout << omsi::format_report(omsi::cmd_eval(a, b, poses, out, threads));
    } else if (*serve) {
      omsi::ServiceOptions so;
      so.threads = threads;
      omsi::RenderService service(so);
      if (!artifact_path.empty()) service.load(std::make_shared<omsi::Artifact>(omsi::load_artifact(artifact_path)));
      httplib::Server server;
      service.attach(server);
      const char* bind = std::getenv("OMSI_BIND");
      const std::string host = bind ? bind : "127.0.0.1";
      std::cout << "serving on http://" << host << ":" << port << std::endl;
      if (!server.listen(host, port)) {
        std::cerr << "cannot bind " << host << ":" << port << "\n";
        return omsi::kExitUsage;
      }
    }
  } catch (const omsi::DivergenceError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return omsi::kExitNumeric;
  } catch (const omsi::OutOfVolumeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return omsi::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return omsi::kExitUsage;
  }
  return omsi::kExitOk;
}
