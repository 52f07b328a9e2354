#pragma once

// MSI artifact: little-endian binary holding the grid, optional swept
// channels, optional MLP weights and optional source views.
//
// Layout (all fields 32-bit):
//   char[4]  magic "MSI1"
//   u32      n_layers, height, width
//   f32      d_inv_max, eps_background
//   u32      n_swept_cameras      (0: swept channels absent)
//   u32      feature_channels     (reserved for learned features, 0)
//   u32      backend              (0 explicit, 1 mlp)
//   u32      n_source_views       (0: no source views)
//   f32      occ_logit[N*H*W]
//   f32      color_logit[N*H*W*3]
//   f32      swept_rgb[N*H*W*K*3], swept_valid[N*H*W*K]     if K > 0
//   mlp:     u32 pos_freqs, dir_freqs, geo_width, app_width, n_cameras,
//            param_count; f32 params[param_count]            if backend = 1
//   views:   per view u32 width, height; f32 focal, cx, cy, fov_max,
//            px, py, pz, qw, qx, qy, qz; f32 rgb[h*w*3]
// Channel arrays are layer-major, then row-major, channels innermost.

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "omsi/field.hpp"
#include "omsi/io.hpp"
#include "omsi/msi.hpp"
#include "omsi/scene.hpp"

namespace omsi {

struct ArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything needed to render without refitting.
struct Artifact {
  MsiGrid<float> grid;
  FieldParams params;
  SourceViews sources;  // empty for explicit artifacts unless requested

  const SourceViews* sources_or_null() const { return sources.size() ? &sources : nullptr; }
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  template <typename T>
  void f32_array(std::span<const T> xs) {
    for (const T x : xs) f32(static_cast<float>(x));
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
  }
  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  float f32() {
    float v;
    raw(&v, 4);
    return v;
  }
  template <typename T>
  void f32_array(std::vector<T>& out, std::size_t n) {
    need(n * 4);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<T>(f32());
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArtifactError("artifact: truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

namespace detail {

inline std::array<float, 11> camera_to_floats(const FisheyeCamera& cam) {
  const Quat& q = cam.pose_rig_from_cam.orientation;
  const Vec3& p = cam.pose_rig_from_cam.position;
  std::array<float, 11> f;
  std::size_t i = 0;
  for (double v : {cam.focal, cam.principal_point.x(), cam.principal_point.y(), cam.fov_max, p.x(), p.y(), p.z(),
                   q.w(), q.x(), q.y(), q.z()})
    f[i++] = static_cast<float>(v);
  return f;
}

inline void camera_from_floats(const std::array<float, 11>& f, FisheyeCamera& cam) {
  cam.focal = f[0];
  cam.principal_point = {f[1], f[2]};
  cam.fov_max = f[3];
  cam.pose_rig_from_cam = Pose({f[4], f[5], f[6]}, Quat(f[7], f[8], f[9], f[10]));
}

}  // namespace detail

/// Rounds source cameras the way serialization does, so an MLP artifact
/// renders identically before and after a save/load cycle.
inline void round_sources_to_float(SourceViews& s) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    detail::camera_from_floats(detail::camera_to_floats(s.cameras[k]), s.cameras[k]);
    s.valid[k] = image_circle_mask(s.cameras[k]);
  }
}

/// Rounds MLP weights to float so an in-memory model renders exactly like
/// its serialized form.
inline void round_params_to_float(FieldParams& p) {
  for (double& w : p.mlp.params()) w = static_cast<float>(w);
}

inline std::vector<std::uint8_t> serialize_artifact(const Artifact& a, bool include_swept) {
  const auto& g = a.grid;
  detail::ByteWriter w;
  w.raw("MSI1", 4);
  w.u32(static_cast<std::uint32_t>(g.n_layers()));
  w.u32(static_cast<std::uint32_t>(g.height));
  w.u32(static_cast<std::uint32_t>(g.width));
  w.f32(static_cast<float>(g.schedule.d_inv_max));
  w.f32(static_cast<float>(g.schedule.eps_background));
  const bool swept = include_swept && g.has_swept();
  w.u32(swept ? static_cast<std::uint32_t>(g.n_cameras) : 0);
  w.u32(0);
  w.u32(a.params.backend == Backend::kMlp ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(a.sources.size()));
  w.f32_array<float>(g.occ_logit);
  w.f32_array<float>(g.color_logit);
  if (swept) {
    w.f32_array<float>(g.swept_rgb);
    for (const auto v : g.swept_valid) w.f32(v ? 1.0f : 0.0f);
  }
  if (a.params.backend == Backend::kMlp) {
    const MlpConfig& c = a.params.mlp.config();
    for (int v : {c.pos_freqs, c.dir_freqs, c.geo_width, c.app_width, c.n_cameras}) w.u32(static_cast<std::uint32_t>(v));
    w.u32(static_cast<std::uint32_t>(a.params.mlp.params().size()));
    w.f32_array<double>(a.params.mlp.params());
  }
  for (std::size_t k = 0; k < a.sources.size(); ++k) {
    const FisheyeCamera& cam = a.sources.cameras[k];
    w.u32(static_cast<std::uint32_t>(cam.width));
    w.u32(static_cast<std::uint32_t>(cam.height));
    for (float v : detail::camera_to_floats(cam)) w.f32(v);
    w.f32_array<float>(a.sources.images[k].data);
  }
  return std::move(w.bytes);
}

/// Parses an artifact; throws ArtifactError on bad magic, inconsistent
/// shapes or trailing/truncated data.
inline Artifact deserialize_artifact(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, "MSI1", 4) != 0) throw ArtifactError("artifact: bad magic");
  const std::uint32_t n_layers = r.u32(), height = r.u32(), width = r.u32();
  SphereSchedule sched;
  sched.n_layers = static_cast<int>(n_layers);
  sched.d_inv_max = r.f32();
  sched.eps_background = r.f32();
  const std::uint32_t n_swept = r.u32();
  const std::uint32_t feature_channels = r.u32();
  const std::uint32_t backend = r.u32();
  const std::uint32_t n_views = r.u32();
  if (n_layers < 2 || n_layers > 4096 || height == 0 || width == 0 || height > 16384 || width > 16384 ||
      n_swept > 64 || n_views > 64 || backend > 1 || feature_channels != 0)
    throw ArtifactError("artifact: header out of range");
  Artifact a;
  try {
    a.grid = MsiGrid<float>(sched, static_cast<int>(height), static_cast<int>(width));
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(std::string("artifact: ") + e.what());
  }
  const std::size_t cells = a.grid.cell_count();
  if (bytes.size() < 40 + cells * 16) throw ArtifactError("artifact: truncated");
  r.f32_array(a.grid.occ_logit, cells);
  r.f32_array(a.grid.color_logit, cells * 3);
  if (n_swept > 0) {
    a.grid.n_cameras = static_cast<int>(n_swept);
    r.f32_array(a.grid.swept_rgb, cells * n_swept * 3);
    std::vector<float> valid;
    r.f32_array(valid, cells * n_swept);
    a.grid.swept_valid.resize(valid.size());
    for (std::size_t i = 0; i < valid.size(); ++i) a.grid.swept_valid[i] = valid[i] != 0.0f ? 1 : 0;
    compute_swept_stats(a.grid);
  }
  if (backend == 1) {
    MlpConfig c;
    c.pos_freqs = static_cast<int>(r.u32());
    c.dir_freqs = static_cast<int>(r.u32());
    c.geo_width = static_cast<int>(r.u32());
    c.app_width = static_cast<int>(r.u32());
    c.n_cameras = static_cast<int>(r.u32());
    if (c.pos_freqs > 32 || c.dir_freqs > 32 || c.geo_width <= 0 || c.geo_width > 4096 || c.app_width <= 0 ||
        c.app_width > 4096 || c.n_cameras < 0 || c.n_cameras > 64)
      throw ArtifactError("artifact: MLP shape out of range");
    a.params.backend = Backend::kMlp;
    a.params.mlp = MlpNetwork(c);
    const std::uint32_t count = r.u32();
    if (count != a.params.mlp.params().size()) throw ArtifactError("artifact: MLP parameter count mismatch");
    r.f32_array(a.params.mlp.params(), count);
  }
  for (std::uint32_t k = 0; k < n_views; ++k) {
    FisheyeCamera cam;
    cam.width = static_cast<int>(r.u32());
    cam.height = static_cast<int>(r.u32());
    if (cam.width <= 0 || cam.height <= 0 || cam.width > 16384 || cam.height > 16384)
      throw ArtifactError("artifact: bad source view size");
    std::array<float, 11> f;
    for (auto& x : f) x = r.f32();
    detail::camera_from_floats(f, cam);
    ImageRGB img(cam.width, cam.height);
    r.f32_array(img.data, img.data.size());
    a.sources.valid.push_back(image_circle_mask(cam));
    a.sources.cameras.push_back(cam);
    a.sources.images.push_back(std::move(img));
  }
  if (!r.at_end()) throw ArtifactError("artifact: trailing bytes");
  if (a.params.backend == Backend::kMlp && a.params.mlp.config().n_cameras != static_cast<int>(n_views))
    throw ArtifactError("artifact: MLP expects source views");
  return a;
}

inline void save_artifact(const std::filesystem::path& path, const Artifact& a, bool include_swept) {
  detail::write_file_bytes(path, serialize_artifact(a, include_swept));
}

inline Artifact load_artifact(const std::filesystem::path& path) {
  return deserialize_artifact(detail::read_file_bytes(path));
}

}  // namespace omsi
