#pragma once

// JSON schemas for scenes, rigs and run configuration, plus bundle
// directories (fisheye PNGs, inverse-depth PFM, manifest).

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "omsi/geometry.hpp"
#include "omsi/io.hpp"
#include "omsi/optim.hpp"
#include "omsi/render.hpp"
#include "omsi/scene.hpp"

namespace omsi {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}
inline json to_json3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json texture_to_json(const Texture& t) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SolidTexture>) {
          return {{"type", "solid"}, {"rgb", to_json3(x.rgb)}};
        } else if constexpr (std::is_same_v<T, CheckerTexture>) {
          return {{"type", "checker"}, {"rgb_a", to_json3(x.rgb_a)}, {"rgb_b", to_json3(x.rgb_b)},
                  {"cell_size", x.cell_size}};
        } else {
          return {{"type", "axis_gradient"}, {"rgb_lo", to_json3(x.rgb_lo)}, {"rgb_hi", to_json3(x.rgb_hi)},
                  {"axis", x.axis}, {"lo", x.lo_coord}, {"hi", x.hi_coord}};
        }
      },
      t);
}

inline Texture texture_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "solid") return SolidTexture{vec3_from(j.at("rgb"))};
  if (type == "checker")
    return CheckerTexture{vec3_from(j.at("rgb_a")), vec3_from(j.at("rgb_b")), j.at("cell_size").get<double>()};
  if (type == "axis_gradient")
    return AxisGradientTexture{vec3_from(j.at("rgb_lo")), vec3_from(j.at("rgb_hi")), j.at("axis").get<int>(),
                               j.at("lo").get<double>(), j.at("hi").get<double>()};
  throw ConfigError("unknown texture type '" + type + "'");
}

inline json shape_to_json(const Shape& s) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SphereShape>) {
          return {{"type", "sphere"}, {"center", to_json3(x.center)}, {"radius", x.radius}};
        } else if constexpr (std::is_same_v<T, BoxShape>) {
          return {{"type", "box"}, {"min", to_json3(x.min)}, {"max", to_json3(x.max)}};
        } else {
          return {{"type", "plane"}, {"normal", to_json3(x.normal)}, {"offset", x.offset}, {"extent", x.extent}};
        }
      },
      s);
}

inline Shape shape_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "sphere") return SphereShape{vec3_from(j.at("center")), j.at("radius").get<double>()};
  if (type == "box") return BoxShape{vec3_from(j.at("min")), vec3_from(j.at("max"))};
  if (type == "plane")
    return PlaneShape{vec3_from(j.at("normal")), j.at("offset").get<double>(), j.at("extent").get<double>()};
  throw ConfigError("unknown shape type '" + type + "'");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenes: {"background": [r,g,b], "primitives": [{"shape": {...}, "texture": {...}}]}
// or {"room_seed": N} for the procedural room.

inline json scene_to_json(const SceneDesc& s) {
  json prims = json::array();
  for (const auto& p : s.primitives)
    prims.push_back({{"shape", detail::shape_to_json(p.shape)}, {"texture", detail::texture_to_json(p.texture)}});
  return {{"background", detail::to_json3(s.background_rgb)}, {"primitives", prims}};
}

inline SceneDesc scene_from_json(const json& j) {
  try {
    if (j.contains("room_seed")) return make_room_scene(j.at("room_seed").get<std::uint64_t>());
    SceneDesc s;
    if (j.contains("background")) s.background_rgb = detail::vec3_from(j.at("background"));
    for (const auto& p : j.at("primitives"))
      s.primitives.push_back({detail::shape_from_json(p.at("shape")), detail::texture_from_json(p.at("texture"))});
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline SceneDesc load_scene(const std::filesystem::path& path) { return scene_from_json(detail::read_json_file(path)); }

// ---------------------------------------------------------------------------
// Rigs: {"cameras": [camera...]} or {"image_width", "image_height",
// "fov_max_deg", "circle_diameter", "n_cameras"} for the default circular rig.

inline json camera_to_json(const FisheyeCamera& c) {
  const Quat& q = c.pose_rig_from_cam.orientation;
  return {{"width", c.width},
          {"height", c.height},
          {"focal", c.focal},
          {"cx", c.principal_point.x()},
          {"cy", c.principal_point.y()},
          {"fov_max_rad", c.fov_max},
          {"position", detail::to_json3(c.pose_rig_from_cam.position)},
          {"orientation_wxyz", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

inline FisheyeCamera camera_from_json(const json& j) {
  FisheyeCamera c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.focal = j.at("focal").get<double>();
  c.principal_point = {j.at("cx").get<double>(), j.at("cy").get<double>()};
  c.fov_max = j.contains("fov_max_rad") ? j.at("fov_max_rad").get<double>()
                                         : j.at("fov_max_deg").get<double>() * kPi / 180.0;
  const auto& q = j.at("orientation_wxyz");
  if (!q.is_array() || q.size() != 4) throw ConfigError("orientation_wxyz needs 4 numbers");
  const Quat quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  if (std::abs(quat.norm() - 1.0) > 1e-6) throw ConfigError("camera orientation is not a unit quaternion");
  c.pose_rig_from_cam = Pose(detail::vec3_from(j.at("position")), quat);
  c.validate();
  return c;
}

inline std::vector<FisheyeCamera> rig_from_json(const json& j) {
  try {
    std::vector<FisheyeCamera> cams;
    if (j.contains("cameras")) {
      for (const auto& c : j.at("cameras")) cams.push_back(camera_from_json(c));
      return cams;
    }
    RigConfig cfg;
    cfg.image_width = j.value("image_width", cfg.image_width);
    cfg.image_height = j.value("image_height", cfg.image_height);
    cfg.fov_max = j.value("fov_max_deg", cfg.fov_max * 180.0 / kPi) * kPi / 180.0;
    cfg.circle_diameter = j.value("circle_diameter", cfg.circle_diameter);
    cfg.n_cameras = j.value("n_cameras", cfg.n_cameras);
    return make_rig(cfg);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("rig: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("rig: ") + e.what());
  }
}

inline json rig_to_json(const std::vector<FisheyeCamera>& cams) {
  json arr = json::array();
  for (const auto& c : cams) arr.push_back(camera_to_json(c));
  return {{"cameras", arr}};
}

inline std::vector<FisheyeCamera> load_rig(const std::filesystem::path& path) {
  return rig_from_json(detail::read_json_file(path));
}

// ---------------------------------------------------------------------------
// Poses and targets as given on the command line / query string.

/// "px,py,pz,qw,qx,qy,qz"; throws ConfigError when malformed.
inline Pose parse_pose(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("pose: trailing characters in '" + item + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("pose: '" + item + "' is not a number");
    }
  }
  if (v.size() != 7) throw ConfigError("pose: expected 7 comma-separated numbers");
  for (double x : v)
    if (!std::isfinite(x)) throw ConfigError("pose: non-finite value");
  const Quat q(v[3], v[4], v[5], v[6]);
  if (q.norm() < 1e-9) throw ConfigError("pose: zero quaternion");
  return Pose({v[0], v[1], v[2]}, q);
}

inline std::string format_pose(const Pose& p) {
  std::ostringstream os;
  os.precision(17);
  const Quat& q = p.orientation;
  os << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ',' << q.w() << ',' << q.x() << ','
     << q.y() << ',' << q.z();
  return os.str();
}

/// "equirect", "equirect:WxH", "fisheye:K" or "pinhole:WxH:FOV".
inline ViewTarget parse_target(const std::string& text, const std::vector<FisheyeCamera>& rig, int default_w,
                               int default_h) {
  const auto parse_size = [](const std::string& s, int& w, int& h) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("target: size must be WxH");
    try {
      w = std::stoi(s.substr(0, x));
      h = std::stoi(s.substr(x + 1));
    } catch (const std::logic_error&) {
      throw ConfigError("target: bad size '" + s + "'");
    }
    if (w <= 0 || h <= 0) throw ConfigError("target: size must be positive");
  };
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts.empty()) throw ConfigError("target: empty");
  if (parts[0] == "equirect") {
    int w = default_w, h = default_h;
    if (parts.size() == 2) parse_size(parts[1], w, h);
    else if (parts.size() != 1) throw ConfigError("target: equirect[:WxH]");
    return ViewTarget::equirect(w, h);
  }
  if (parts[0] == "fisheye") {
    if (parts.size() != 2) throw ConfigError("target: fisheye:K");
    int k = -1;
    try {
      k = std::stoi(parts[1]);
    } catch (const std::logic_error&) {
      throw ConfigError("target: bad camera index");
    }
    if (k < 0 || k >= static_cast<int>(rig.size())) throw ConfigError("target: camera index out of range");
    return ViewTarget::fisheye(rig[k]);
  }
  if (parts[0] == "pinhole") {
    if (parts.size() != 3) throw ConfigError("target: pinhole:WxH:FOV");
    int w, h;
    parse_size(parts[1], w, h);
    double fov;
    try {
      fov = std::stod(parts[2]);
    } catch (const std::logic_error&) {
      throw ConfigError("target: bad fov");
    }
    if (!(fov > 0.0 && fov < 180.0)) throw ConfigError("target: fov must lie in (0, 180) degrees");
    return ViewTarget::pinhole(w, h, fov);
  }
  throw ConfigError("target: unknown kind '" + parts[0] + "'");
}

// ---------------------------------------------------------------------------
// Run configuration: same keys as the command-line flags.

struct RunConfig {
  std::string scene;
  std::string rig;
  std::string out = "out";
  int layers = 64;
  int msi_width = 256;
  int msi_height = 128;
  double d_inv_max = 2.0;
  double eps_background = 1e-3;
  TrainConfig train;
  std::string backend = "explicit";
  std::uint64_t seed = 0;

  SphereSchedule schedule() const { return {layers, d_inv_max, eps_background}; }
};

inline void apply_run_config_json(const json& j, RunConfig& c) {
  try {
    c.scene = j.value("scene", c.scene);
    c.rig = j.value("rig", c.rig);
    c.out = j.value("out", c.out);
    c.layers = j.value("layers", c.layers);
    c.msi_width = j.value("msi_width", c.msi_width);
    c.msi_height = j.value("msi_height", c.msi_height);
    c.d_inv_max = j.value("d_inv_max", c.d_inv_max);
    c.eps_background = j.value("eps_background", c.eps_background);
    c.backend = j.value("backend", c.backend);
    c.seed = j.value("seed", c.seed);
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.train.lr = t.value("lr", c.train.lr);
      c.train.grid_lr = t.value("grid_lr", c.train.grid_lr);
      c.train.lambda_d = t.value("lambda_d", c.train.lambda_d);
      c.train.n_fisheye_rays = t.value("n_fisheye_rays", c.train.n_fisheye_rays);
      c.train.n_panorama_rays = t.value("n_panorama_rays", c.train.n_panorama_rays);
      c.train.iterations = t.value("iterations", c.train.iterations);
      c.train.beta1 = t.value("beta1", c.train.beta1);
      c.train.beta2 = t.value("beta2", c.train.beta2);
      c.train.eps = t.value("eps", c.train.eps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Bundle directories

inline constexpr const char* kBundleManifest = "bundle.json";

/// Writes cam<k>.png, gt_inv_depth.pfm, gt_panorama.png and bundle.json.
inline void save_bundle(const SampleBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json images = json::array();
  for (std::size_t k = 0; k < b.fisheye_images.size(); ++k) {
    const std::string name = "cam" + std::to_string(k) + ".png";
    write_png(dir / name, b.fisheye_images[k]);
    images.push_back(name);
  }
  write_pfm(dir / "gt_inv_depth.pfm", b.gt_inv_depth);
  json manifest = {{"format", "omsi-bundle-1"},
                   {"rig", rig_to_json(b.cameras)},
                   {"images", images},
                   {"gt_inv_depth", "gt_inv_depth.pfm"}};
  if (b.gt_panorama_rgb) {
    write_png(dir / "gt_panorama.png", *b.gt_panorama_rgb);
    manifest["gt_panorama_rgb"] = "gt_panorama.png";
  }
  if (b.scene) manifest["scene"] = scene_to_json(*b.scene);
  detail::write_text_file(dir / kBundleManifest, manifest.dump(2) + "\n");
}

inline SampleBundle load_bundle(const std::filesystem::path& dir) {
  const json m = detail::read_json_file(dir / kBundleManifest);
  SampleBundle b;
  try {
    if (m.value("format", "") != "omsi-bundle-1") throw ConfigError("bundle: unknown manifest format");
    b.cameras = rig_from_json(m.at("rig"));
    for (const auto& name : m.at("images")) b.fisheye_images.push_back(read_png_rgb(dir / name.get<std::string>()));
    for (const auto& cam : b.cameras) b.fisheye_valid.push_back(image_circle_mask(cam));
    b.gt_inv_depth = read_pfm(dir / m.at("gt_inv_depth").get<std::string>());
    if (m.contains("gt_panorama_rgb")) b.gt_panorama_rgb = read_png_rgb(dir / m.at("gt_panorama_rgb").get<std::string>());
    if (m.contains("scene")) b.scene = scene_from_json(m.at("scene"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bundle: ") + e.what());
  }
  b.validate();
  return b;
}

}  // namespace omsi
