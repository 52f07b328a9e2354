#pragma once

// HTTP render service over a loaded artifact.
//   GET  /meta                                  artifact descriptor (JSON)
//   GET  /render?pose=&w=&h=&mode=&target=&fov=  PNG frame
//   POST /load[?path=]                          replace the artifact (body or file)

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "omsi/artifact.hpp"
#include "omsi/config.hpp"
#include "omsi/io.hpp"
#include "omsi/render.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with
// Eigen parameter names.
#include "httplib.h"

namespace omsi {

struct ServiceOptions {
  int max_width = 1024;
  int max_height = 1024;
  int default_width = 256;
  int default_height = 256;
  double default_fov_deg = 90.0;
  int threads = default_thread_count();
};

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

class RenderService {
 public:
  explicit RenderService(ServiceOptions opts = {}) : opts_(opts) {}

  /// Swaps in a new artifact. Requests already holding the old one finish
  /// on it.
  void load(std::shared_ptr<const Artifact> artifact) {
    std::lock_guard load_lock(load_mutex_);
    std::unique_lock lock(state_mutex_);
    state_ = std::move(artifact);
  }

  std::shared_ptr<const Artifact> current() const {
    std::shared_lock lock(state_mutex_);
    return state_;
  }

  ServiceResponse meta() const {
    const auto a = current();
    if (!a) return error(503, "no artifact loaded");
    const auto& g = a->grid;
    nlohmann::json j = {{"n_layers", g.n_layers()},
                        {"msi_height", g.height},
                        {"msi_width", g.width},
                        {"d_inv_max", g.schedule.d_inv_max},
                        {"eps_background", g.schedule.eps_background},
                        {"background_radius", g.schedule.background_radius()},
                        {"n_cameras", static_cast<int>(a->sources.size() ? a->sources.size() : g.n_cameras)},
                        {"backend", a->params.backend == Backend::kMlp ? "mlp" : "explicit"},
                        {"pose_bounds", {{"center", {0.0, 0.0, 0.0}}, {"radius", g.schedule.background_radius()}}},
                        {"max_width", opts_.max_width},
                        {"max_height", opts_.max_height}};
    return {200, "application/json", j.dump()};
  }

  ServiceResponse render(const std::map<std::string, std::string>& query) const {
    const auto a = current();
    if (!a) return error(503, "no artifact loaded");

    const auto get = [&](const std::string& k) -> const std::string* {
      const auto it = query.find(k);
      return it == query.end() ? nullptr : &it->second;
    };
    Pose pose;
    try {
      const std::string* p = get("pose");
      if (!p) return error(400, "missing pose");
      pose = parse_pose(*p);
    } catch (const ConfigError& e) {
      return error(400, e.what());
    }
    int w = opts_.default_width, h = opts_.default_height;
    double fov = opts_.default_fov_deg;
    try {
      if (const auto* s = get("w")) w = std::stoi(*s);
      if (const auto* s = get("h")) h = std::stoi(*s);
      if (const auto* s = get("fov")) fov = std::stod(*s);
    } catch (const std::logic_error&) {
      return error(400, "malformed w/h/fov");
    }
    if (w <= 0 || h <= 0 || w > opts_.max_width || h > opts_.max_height) return error(400, "image size out of range");
    const std::string mode = get("mode") ? *get("mode") : "color";
    if (mode != "color" && mode != "inv_depth" && mode != "acc") return error(400, "unknown mode");
    const std::string target_kind = get("target") ? *get("target") : "pinhole";
    ViewTarget target;
    if (target_kind == "pinhole") {
      if (!(fov > 0.0 && fov < 180.0)) return error(400, "fov out of range");
      target = ViewTarget::pinhole(w, h, fov);
    } else if (target_kind == "equirect") {
      target = ViewTarget::equirect(w, h);
    } else {
      return error(400, "unknown target");
    }
    if (!(pose.position.norm() < a->grid.schedule.background_radius())) return error(422, "pose outside volume");

    RenderedView view;
    try {
      view = render_view(a->params, a->grid, a->sources_or_null(), target, pose, opts_.threads);
    } catch (const OutOfVolumeError& e) {
      return error(422, e.what());
    }
    std::vector<std::uint8_t> png;
    if (mode == "color") {
      png = encode_png(view.rgb);
    } else if (mode == "acc") {
      png = encode_png(view.acc);
    } else {
      ImageGray tone(view.inv_depth.width, view.inv_depth.height);
      const double scale = 1.0 / a->grid.schedule.d_inv_max;
      for (std::size_t i = 0; i < tone.data.size(); ++i)
        tone.data[i] = static_cast<float>(std::clamp(view.inv_depth.data[i] * scale, 0.0, 1.0));
      png = encode_png(tone);
    }
    return {200, "image/png", std::string(png.begin(), png.end())};
  }

  /// Loads from `path` when given, otherwise from the body bytes.
  ServiceResponse load_request(const std::string& body, const std::string* path) {
    try {
      auto artifact = std::make_shared<Artifact>(
          path ? load_artifact(*path)
               : deserialize_artifact(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size())));
      load(std::move(artifact));
    } catch (const ArtifactError& e) {
      return error(400, e.what());
    } catch (const IoError& e) {
      return error(400, e.what());
    }
    return meta();
  }

  /// Registers the routes on an httplib server.
  void attach(httplib::Server& server) {
    server.Get("/meta", [this](const httplib::Request&, httplib::Response& res) { reply(res, meta()); });
    server.Get("/render", [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> q;
      for (const auto& [k, v] : req.params) q[k] = v;
      reply(res, render(q));
    });
    server.Post("/load", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string path = req.has_param("path") ? req.get_param_value("path") : std::string();
      reply(res, load_request(req.body, req.has_param("path") ? &path : nullptr));
    });
  }

 private:
  static ServiceResponse error(int status, const std::string& msg) {
    return {status, "application/json", nlohmann::json{{"error", msg}}.dump()};
  }

  static void reply(httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  }

  ServiceOptions opts_;
  mutable std::shared_mutex state_mutex_;
  std::mutex load_mutex_;
  std::shared_ptr<const Artifact> state_;
};

}  // namespace omsi
