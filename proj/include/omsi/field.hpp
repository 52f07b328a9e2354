#pragma once

// Radiance field evaluation: (x, d, f_geo, f_appr, c_proj) -> (occupancy, rgb).
// Two backends share the query interface: an explicit one that reads the
// MSI logits directly and a small two-stage MLP with manual backprop.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "omsi/geometry.hpp"
#include "omsi/msi.hpp"

namespace omsi {

/// sin/cos of 2^j * pi * u for each component u and each j < L, component-major.
inline void positional_encoding(std::span<const double> v, int L, std::vector<double>& out) {
  if (L < 0) throw std::invalid_argument("positional_encoding: negative frequency count");
  for (double u : v) {
    double scale = kPi;
    for (int j = 0; j < L; ++j, scale *= 2.0) {
      out.push_back(std::sin(scale * u));
      out.push_back(std::cos(scale * u));
    }
  }
}

inline std::vector<double> positional_encoding(std::span<const double> v, int L) {
  std::vector<double> out;
  out.reserve(v.size() * 2 * static_cast<std::size_t>(std::max(L, 0)));
  positional_encoding(v, L, out);
  return out;
}

inline constexpr int kGeoFeatureDim = 2;   // occ logit, photo-consistency variance
inline constexpr int kApprFeatureDim = 6;  // color logits, masked mean swept rgb

struct QueryContext {
  Vec3 x = Vec3::Zero();
  Vec3 d = Vec3::UnitZ();
  std::array<double, kGeoFeatureDim> f_geo{};
  std::array<double, kApprFeatureDim> f_appr{};
  std::vector<ProjectedColor> c_proj;
};

struct FieldOutput {
  double occupancy = 0.0;
  std::array<double, 3> rgb{};
};

/// Gradient of a query's outputs w.r.t. its interpolated logit features.
struct FeatureGradient {
  double occ_logit = 0.0;
  std::array<double, 3> color_logit{};
};

struct MlpConfig {
  int pos_freqs = 6;
  int dir_freqs = 4;
  int geo_width = 64;
  int app_width = 32;
  int n_cameras = 4;

  int geo_input() const { return 3 * 2 * pos_freqs + kGeoFeatureDim; }
  int app_input() const { return geo_width + 3 * 2 * dir_freqs + kApprFeatureDim + 4 * n_cameras; }
  bool operator==(const MlpConfig&) const = default;
};

/// Dense layer view into a flat parameter vector: weights (out x in,
/// row-major) followed by biases.
struct DenseLayout {
  int in = 0;
  int out = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(in) * out + out; }
  std::size_t bias_offset() const { return offset + static_cast<std::size_t>(in) * out; }
};

/// Two-stage MLP. Stage one maps (PE(x), f_geo) through two ReLU layers to a
/// hidden feature and an occupancy logit; stage two maps (hidden, PE(d),
/// f_appr, masked c_proj) through one ReLU layer to rgb logits.
class MlpNetwork {
 public:
  enum Layer { kGeo1, kGeo2, kGeoHead, kApp1, kAppHead, kLayerCount };

  MlpNetwork() : MlpNetwork(MlpConfig{}) {}
  explicit MlpNetwork(const MlpConfig& cfg) : cfg_(cfg) {
    const std::array<std::pair<int, int>, kLayerCount> shapes = {{{cfg.geo_input(), cfg.geo_width},
                                                                   {cfg.geo_width, cfg.geo_width},
                                                                   {cfg.geo_width, 1},
                                                                   {cfg.app_input(), cfg.app_width},
                                                                   {cfg.app_width, 3}}};
    std::size_t off = 0;
    for (int l = 0; l < kLayerCount; ++l) {
      layers_[l] = {shapes[l].first, shapes[l].second, off};
      off += layers_[l].size();
    }
    params_.assign(off, 0.0);
  }

  const MlpConfig& config() const { return cfg_; }
  const DenseLayout& layer(int l) const { return layers_[l]; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// He-uniform weights, zero biases.
  void init_random(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const auto& L : layers_) {
      const double bound = std::sqrt(6.0 / L.in);
      for (std::size_t i = 0; i < static_cast<std::size_t>(L.in) * L.out; ++i)
        params_[L.offset + i] = bound * (2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0);
      std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(L.bias_offset()), L.out, 0.0);
    }
  }

  bool finite() const {
    for (double p : params_)
      if (!std::isfinite(p)) return false;
    return true;
  }

  /// Activations kept for the backward pass.
  struct Tape {
    std::vector<double> in_geo, h1, h2, in_app, a1;
    double occ_logit = 0.0;
    std::array<double, 3> rgb_logit{};
  };

  void forward(const QueryContext& q, Tape& t) const {
    t.in_geo.clear();
    const std::array<double, 3> x{q.x.x(), q.x.y(), q.x.z()};
    positional_encoding(x, cfg_.pos_freqs, t.in_geo);
    t.in_geo.insert(t.in_geo.end(), q.f_geo.begin(), q.f_geo.end());
    dense(kGeo1, t.in_geo, t.h1, true);
    dense(kGeo2, t.h1, t.h2, true);
    std::vector<double> head;
    dense(kGeoHead, t.h2, head, false);
    t.occ_logit = head[0];

    t.in_app = t.h2;
    const std::array<double, 3> d{q.d.x(), q.d.y(), q.d.z()};
    positional_encoding(d, cfg_.dir_freqs, t.in_app);
    t.in_app.insert(t.in_app.end(), q.f_appr.begin(), q.f_appr.end());
    if (static_cast<int>(q.c_proj.size()) != cfg_.n_cameras)
      throw std::invalid_argument("mlp: projected color count does not match configuration");
    for (const auto& pc : q.c_proj) {
      // Invalid cameras contribute zeros plus a zero validity flag.
      for (int c = 0; c < 3; ++c) t.in_app.push_back(pc.valid ? pc.rgb[c] : 0.0);
      t.in_app.push_back(pc.valid ? 1.0 : 0.0);
    }
    dense(kApp1, t.in_app, t.a1, true);
    std::vector<double> rgb;
    dense(kAppHead, t.a1, rgb, false);
    for (int c = 0; c < 3; ++c) t.rgb_logit[c] = rgb[c];
  }

  /// Accumulates d(loss)/d(params) into grad given gradients on the logits.
  void backward(const Tape& t, double d_occ_logit, const std::array<double, 3>& d_rgb_logit,
                std::span<double> grad) const {
    std::vector<double> d_a1, d_in_app, d_h2, d_h1, d_unused;
    dense_backward(kAppHead, t.a1, std::vector<double>(d_rgb_logit.begin(), d_rgb_logit.end()), nullptr, grad,
                   d_a1);
    dense_backward(kApp1, t.in_app, d_a1, &t.a1, grad, d_in_app);
    d_h2.assign(d_in_app.begin(), d_in_app.begin() + cfg_.geo_width);
    std::vector<double> d_h2_head;
    dense_backward(kGeoHead, t.h2, {d_occ_logit}, nullptr, grad, d_h2_head);
    for (int i = 0; i < cfg_.geo_width; ++i) d_h2[i] += d_h2_head[i];
    dense_backward(kGeo2, t.h1, d_h2, &t.h2, grad, d_h1);
    dense_backward(kGeo1, t.in_geo, d_h1, &t.h1, grad, d_unused);
  }

 private:
  void dense(int l, const std::vector<double>& in, std::vector<double>& out, bool relu) const {
    const DenseLayout& L = layers_[l];
    if (static_cast<int>(in.size()) != L.in) throw std::logic_error("mlp: layer input size mismatch");
    out.assign(L.out, 0.0);
    const double* w = params_.data() + L.offset;
    const double* b = params_.data() + L.bias_offset();
    for (int o = 0; o < L.out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) s += row[i] * in[i];
      out[o] = relu ? std::max(0.0, s) : s;
    }
  }

  // `activated` is the layer's ReLU output (null for linear layers); the
  // derivative is 1 where it is positive.
  void dense_backward(int l, const std::vector<double>& in, const std::vector<double>& d_out,
                      const std::vector<double>* activated, std::span<double> grad,
                      std::vector<double>& d_in) const {
    const DenseLayout& L = layers_[l];
    d_in.assign(L.in, 0.0);
    const double* w = params_.data() + L.offset;
    double* gw = grad.data() + L.offset;
    double* gb = grad.data() + L.bias_offset();
    for (int o = 0; o < L.out; ++o) {
      double g = d_out[o];
      if (activated && (*activated)[o] <= 0.0) g = 0.0;
      if (g == 0.0) continue;
      gb[o] += g;
      const double* row = w + static_cast<std::size_t>(o) * L.in;
      double* grow = gw + static_cast<std::size_t>(o) * L.in;
      for (int i = 0; i < L.in; ++i) {
        grow[i] += g * in[i];
        d_in[i] += g * row[i];
      }
    }
  }

  MlpConfig cfg_;
  std::array<DenseLayout, kLayerCount> layers_{};
  std::vector<double> params_;
};

enum class Backend { kExplicit, kMlp };

/// Field parameters. The explicit backend's parameters are the logit
/// channels of the MSI grid itself; only the MLP carries its own weights.
struct FieldParams {
  Backend backend = Backend::kExplicit;
  MlpNetwork mlp;

  static FieldParams make_explicit() { return {}; }
  static FieldParams make_mlp(const MlpConfig& cfg, std::uint64_t seed) {
    FieldParams p;
    p.backend = Backend::kMlp;
    p.mlp = MlpNetwork(cfg);
    p.mlp.init_random(seed);
    return p;
  }
};

struct FieldTape {
  FieldOutput out;
  MlpNetwork::Tape mlp;
};

inline FieldOutput eval(const FieldParams& params, const QueryContext& q, FieldTape* tape = nullptr) {
  FieldOutput out;
  if (params.backend == Backend::kExplicit) {
    out.occupancy = sigmoid(q.f_geo[0]);
    for (int c = 0; c < 3; ++c) out.rgb[c] = sigmoid(q.f_appr[c]);
  } else {
    MlpNetwork::Tape local;
    MlpNetwork::Tape& t = tape ? tape->mlp : local;
    params.mlp.forward(q, t);
    out.occupancy = sigmoid(t.occ_logit);
    for (int c = 0; c < 3; ++c) out.rgb[c] = sigmoid(t.rgb_logit[c]);
  }
  if (tape) tape->out = out;
  return out;
}

/// Reverse-mode pass for one query. MLP weight gradients accumulate into
/// mlp_grad (sized like the weights); for the explicit backend the gradient
/// w.r.t. the interpolated logits is returned and the caller scatters it
/// through the interpolation stencil.
inline FeatureGradient eval_with_gradients(const FieldParams& params, const QueryContext& q, double d_occupancy,
                                           const std::array<double, 3>& d_rgb, std::span<double> mlp_grad,
                                           const FieldTape* tape = nullptr) {
  FieldTape local;
  if (!tape) {
    eval(params, q, &local);
    tape = &local;
  }
  const FieldOutput& o = tape->out;
  const double d_occ_logit = d_occupancy * o.occupancy * (1.0 - o.occupancy);
  std::array<double, 3> d_rgb_logit{};
  for (int c = 0; c < 3; ++c) d_rgb_logit[c] = d_rgb[c] * o.rgb[c] * (1.0 - o.rgb[c]);
  FeatureGradient g;
  if (params.backend == Backend::kExplicit) {
    g.occ_logit = d_occ_logit;
    g.color_logit = d_rgb_logit;
  } else {
    params.mlp.backward(tape->mlp, d_occ_logit, d_rgb_logit, mlp_grad);
  }
  return g;
}

/// Scatters a feature gradient on layer n into grid-shaped gradient buffers.
template <typename Real>
void scatter_feature_gradient(std::span<Real> occ_grad, std::span<Real> color_grad, std::size_t layer_offset,
                              const BilinearStencil& s, const FeatureGradient& g) {
  for (int i = 0; i < 4; ++i) {
    const std::size_t cell = layer_offset + s.cell[i];
    const double w = s.weight[i];
    occ_grad[cell] += static_cast<Real>(w * g.occ_logit);
    for (int c = 0; c < 3; ++c) color_grad[cell * 3 + c] += static_cast<Real>(w * g.color_logit[c]);
  }
}

}  // namespace omsi
