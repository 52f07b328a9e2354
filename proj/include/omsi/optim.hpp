#pragma once

// Multi-task supervision: color on fisheye rays, inverse depth on center
// panorama rays, fitted with Adam.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <random>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "omsi/field.hpp"
#include "omsi/msi.hpp"
#include "omsi/parallel.hpp"
#include "omsi/render.hpp"
#include "omsi/scene.hpp"

namespace omsi {

struct AdamHyper {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr = 3e-4;       // MLP weights
  double grid_lr = 0.05;  // explicit logit channels
  double lambda_d = 5.0;
  int n_fisheye_rays = 8192;
  int n_panorama_rays = 8192;
  int iterations = 5000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int threads = default_thread_count();

  void validate() const {
    if (!(lr > 0.0) || !(grid_lr > 0.0) || !(lambda_d >= 0.0) || n_fisheye_rays < 0 || n_panorama_rays < 0 ||
        iterations < 0 || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0))
      throw std::invalid_argument("train config: invalid hyperparameters");
    if (n_fisheye_rays + n_panorama_rays == 0) throw std::invalid_argument("train config: empty ray batch");
  }
  AdamHyper adam(double rate) const { return {rate, beta1, beta2, eps}; }
};

struct RayBatch {
  std::vector<Ray> fisheye_rays;
  std::vector<std::array<double, 3>> fisheye_rgb;
  std::vector<int> fisheye_camera;
  std::vector<Vec2> fisheye_pixel;
  std::vector<Ray> panorama_rays;
  std::vector<double> panorama_inv_depth;
};

/// Draws k distinct entries of pool (k <= pool.size()) by a partial
/// Fisher-Yates shuffle; the pool stays a permutation of itself.
template <typename T>
void draw_without_replacement(std::vector<T>& pool, std::size_t k, std::mt19937_64& rng, std::vector<T>& out) {
  out.clear();
  const std::size_t n = pool.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t range = n - i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(pool[i], pool[i + r % range]);
    out.push_back(pool[i]);
  }
}

/// Uniform pixel sampling over the fisheye image circles and the panorama.
/// Requests larger than a stream's pixel count fall back to sampling with
/// replacement.
class RaySampler {
 public:
  explicit RaySampler(const SampleBundle& bundle) : bundle_(&bundle) {
    bundle.validate();
    for (std::size_t k = 0; k < bundle.cameras.size(); ++k) {
      const auto& cam = bundle.cameras[k];
      for (int v = 0; v < cam.height; ++v)
        for (int u = 0; u < cam.width; ++u)
          if (bundle.fisheye_valid[k][static_cast<std::size_t>(v) * cam.width + u])
            fisheye_pool_.push_back(pack(static_cast<int>(k), u, v));
    }
    panorama_pool_.resize(bundle.gt_inv_depth.pixel_count());
    for (std::size_t i = 0; i < panorama_pool_.size(); ++i) panorama_pool_[i] = static_cast<std::uint32_t>(i);
  }

  RayBatch sample(int n_fisheye, int n_panorama, std::mt19937_64& rng) {
    RayBatch b;
    std::vector<std::uint64_t> fish;
    draw(fisheye_pool_, static_cast<std::size_t>(n_fisheye), rng, fish);
    // Pixel order keeps neighbouring rays on neighbouring grid cells.
    std::sort(fish.begin(), fish.end());
    for (const auto key : fish) {
      const int k = static_cast<int>(key >> 40), u = static_cast<int>((key >> 20) & 0xFFFFF),
                v = static_cast<int>(key & 0xFFFFF);
      const auto& cam = bundle_->cameras[k];
      b.fisheye_rays.push_back(unproject_fisheye(cam, Vec2(u, v)));
      const float* px = bundle_->fisheye_images[k].at(u, v);
      b.fisheye_rgb.push_back({px[0], px[1], px[2]});
      b.fisheye_camera.push_back(k);
      b.fisheye_pixel.emplace_back(u, v);
    }
    std::vector<std::uint32_t> pano;
    draw(panorama_pool_, static_cast<std::size_t>(n_panorama), rng, pano);
    std::sort(pano.begin(), pano.end());
    const auto& depth = bundle_->gt_inv_depth;
    for (const auto idx : pano) {
      const int u = static_cast<int>(idx % depth.width), v = static_cast<int>(idx / depth.width);
      b.panorama_rays.push_back(equirect_ray(depth.width, depth.height, u, v));
      b.panorama_inv_depth.push_back(depth(u, v));
    }
    return b;
  }

 private:
  static std::uint64_t pack(int k, int u, int v) {
    return (static_cast<std::uint64_t>(k) << 40) | (static_cast<std::uint64_t>(u) << 20) | static_cast<std::uint64_t>(v);
  }

  template <typename T>
  static void draw(std::vector<T>& pool, std::size_t k, std::mt19937_64& rng, std::vector<T>& out) {
    if (pool.empty()) {
      out.clear();
      return;
    }
    if (k <= pool.size()) {
      draw_without_replacement(pool, k, rng, out);
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < k; ++i) out.push_back(pool[rng() % pool.size()]);
  }

  const SampleBundle* bundle_;
  std::vector<std::uint64_t> fisheye_pool_;
  std::vector<std::uint32_t> panorama_pool_;
};

inline RayBatch sample_ray_batch(const SampleBundle& bundle, const TrainConfig& cfg, std::mt19937_64& rng) {
  RaySampler sampler(bundle);
  return sampler.sample(cfg.n_fisheye_rays, cfg.n_panorama_rays, rng);
}

struct LossValue {
  double total = 0.0;
  double color = 0.0;
  double depth = 0.0;
};

/// L_color: mean over fisheye rays of the squared L2 color error.
/// L_depth: mean over panorama rays of the absolute inverse-depth error.
inline LossValue loss(const RayBatch& batch, std::span<const RenderResult> fisheye,
                      std::span<const RenderResult> panorama, double lambda_d) {
  if (fisheye.size() != batch.fisheye_rays.size() || panorama.size() != batch.panorama_rays.size())
    throw std::invalid_argument("loss: rendered results do not match the batch");
  LossValue l;
  for (std::size_t i = 0; i < fisheye.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double e = fisheye[i].rgb[c] - batch.fisheye_rgb[i][c];
      l.color += e * e;
    }
  for (std::size_t i = 0; i < panorama.size(); ++i)
    l.depth += std::abs(panorama[i].inv_depth - batch.panorama_inv_depth[i]);
  if (!fisheye.empty()) l.color /= static_cast<double>(fisheye.size());
  if (!panorama.empty()) l.depth /= static_cast<double>(panorama.size());
  l.total = l.color + lambda_d * l.depth;
  return l;
}

// ---------------------------------------------------------------------------
// Adam

template <typename Real>
struct AdamState {
  std::vector<Real> m;
  std::vector<Real> v;
  long step = 0;
  long skipped = 0;

  explicit AdamState(std::size_t n = 0) : m(n, Real(0)), v(n, Real(0)) {}
};

/// Exponent-bit test; vectorizes where a std::isfinite loop does not.
template <typename Real>
bool all_finite(std::span<const Real> values) {
  using Bits = std::conditional_t<sizeof(Real) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits exp_mask = sizeof(Real) == 4 ? Bits(0x7f800000u) : Bits(0x7ff0000000000000ull);
  Bits bad = 0;
  for (const Real x : values) bad |= Bits((std::bit_cast<Bits>(x) & exp_mask) == exp_mask);
  return bad == 0;
}

/// One bias-corrected Adam update. Returns false and leaves everything
/// untouched when a gradient entry is not finite.
template <typename Real>
bool adam_step(std::span<Real> params, std::span<const Real> grads, AdamState<Real>& state, const AdamHyper& h) {
  if (params.size() != grads.size() || state.m.size() != params.size())
    throw std::invalid_argument("adam_step: size mismatch");
  if (!all_finite(grads)) {
    ++state.skipped;
    return false;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  // Folding both corrections into the step size and epsilon.
  const auto alpha = static_cast<Real>(h.lr * std::sqrt(c2) / c1);
  const auto eps_hat = static_cast<Real>(h.eps * std::sqrt(c2));
  const auto b1 = static_cast<Real>(h.beta1), b2 = static_cast<Real>(h.beta2);
  const Real* g = grads.data();
  Real* p = params.data();
  Real* m = state.m.data();
  Real* v = state.v.data();
  const std::size_t n = params.size();
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (Real(1) - b1) * g[i];
    v[i] = b2 * v[i] + (Real(1) - b2) * g[i] * g[i];
    p[i] -= alpha * m[i] / (std::sqrt(v[i]) + eps_hat);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Fitting

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LossRecord {
  int iteration = 0;
  LossValue loss;
};

/// Owns gradient buffers and optimizer state for one grid + field pair.
/// Gradients accumulate in ray order regardless of thread count.
template <typename Real>
class Trainer {
 public:
  Trainer(MsiGrid<Real>& grid, FieldParams& params, const SourceViews* sources, const TrainConfig& cfg)
      : grid_(grid), params_(params), sources_(sources), cfg_(cfg) {
    cfg.validate();
    if (params.backend == Backend::kExplicit) {
      const std::size_t cells = grid.cell_count();
      packed_.resize(cells * 4);
      for (std::size_t i = 0; i < cells; ++i) {
        const std::size_t slot = packed_slot(i);
        packed_[slot * 4] = grid.occ_logit[i];
        for (int c = 0; c < 3; ++c) packed_[slot * 4 + 1 + c] = grid.color_logit[i * 3 + c];
      }
      packed_grad_.assign(cells * 4, Real(0));
      packed_adam_ = AdamState<Real>(cells * 4);
    } else {
      if (!sources) throw std::invalid_argument("trainer: MLP backend needs source views");
      mlp_grad_.assign(params.mlp.params().size(), 0.0);
      mlp_adam_ = AdamState<double>(params.mlp.params().size());
    }
  }

  std::vector<Real> occ_grad() const { return unpack(packed_grad_, 0, 1); }
  std::vector<Real> color_grad() const { return unpack(packed_grad_, 1, 3); }
  const std::vector<double>& mlp_grad() const { return mlp_grad_; }
  long skipped_steps() const { return packed_adam_.skipped + mlp_adam_.skipped; }

  /// Copies the working grid logits back into the grid. Explicit training
  /// keeps occupancy and color interleaved per cell, with the layer index
  /// innermost so one ray's samples stay close in memory; the grid is stale
  /// until this is called.
  void write_back() {
    if (params_.backend != Backend::kExplicit) return;
    grid_.occ_logit = unpack(packed_, 0, 1);
    grid_.color_logit = unpack(packed_, 1, 3);
  }

  /// Renders the batch and returns its loss; with `gradients` set, also
  /// fills the gradient buffers (cleared first).
  LossValue evaluate(const RayBatch& batch, bool gradients) {
    const std::size_t nf = batch.fisheye_rays.size(), np = batch.panorama_rays.size();
    const std::size_t n_rays = nf + np;
    results_.assign(n_rays, RenderResult{});
    if (gradients) zero_gradients();

    const std::size_t n_blocks = (n_rays + kBlockRays - 1) / kBlockRays;
    // Grid gradients accumulate in ray order: directly with one worker,
    // through per-block records otherwise. MLP gradients always go through
    // per-block sums so the result does not depend on the thread count.
    const bool serial = params_.backend == Backend::kExplicit &&
                        std::clamp(cfg_.threads, 1, static_cast<int>(std::max<std::size_t>(n_blocks, 1))) == 1;
    if (gradients && !serial) blocks_.resize(n_blocks);
    const double inv_nf = nf ? 1.0 / static_cast<double>(nf) : 0.0;
    const double inv_np = np ? 1.0 / static_cast<double>(np) : 0.0;

    parallel_for(
        n_blocks,
        [&](std::size_t bb, std::size_t be) {
          for (std::size_t blk = bb; blk < be; ++blk) {
            BlockGrad* bg = gradients && !serial ? &blocks_[blk] : nullptr;
            if (bg) bg->clear(params_.backend == Backend::kMlp ? mlp_grad_.size() : 0);
            const auto emit = [&](const ScatterRecord& rec) {
              if (bg)
                bg->records.push_back(rec);
              else
                accumulate(rec);
            };
            std::span<double> mlp_sink = bg ? std::span<double>(bg->mlp) : std::span<double>(mlp_grad_);
            const std::size_t r_end = std::min(n_rays, (blk + 1) * kBlockRays);
            for (std::size_t r = blk * kBlockRays; r < r_end; ++r) {
              const bool fish = r < nf;
              const Ray& ray = fish ? batch.fisheye_rays[r] : batch.panorama_rays[r - nf];
              // Per-ray loss gradient, known once the ray is composited.
              const auto upstream = [&](const RenderResult& res, std::array<double, 3>& d_rgb, double& d_inv) {
                d_rgb = {0.0, 0.0, 0.0};
                d_inv = 0.0;
                if (fish) {
                  for (int c = 0; c < 3; ++c) d_rgb[c] = 2.0 * (res.rgb[c] - batch.fisheye_rgb[r][c]) * inv_nf;
                } else {
                  const double e = res.inv_depth - batch.panorama_inv_depth[r - nf];
                  d_inv = cfg_.lambda_d * inv_np * static_cast<double>((e > 0.0) - (e < 0.0));
                }
              };
              results_[r] = params_.backend == Backend::kExplicit
                                ? explicit_ray(ray, !fish, gradients, upstream, emit)
                                : mlp_ray(ray, gradients, upstream, mlp_sink);
            }
          }
        },
        cfg_.threads);

    if (gradients && !serial) reduce_blocks();
    return loss(batch, std::span(results_).first(nf), std::span(results_).subspan(nf), cfg_.lambda_d);
  }

  /// Applies Adam with the current gradient buffers.
  void apply_gradients() {
    if (params_.backend == Backend::kExplicit) {
      adam_step<Real>(packed_, packed_grad_, packed_adam_, cfg_.adam(cfg_.grid_lr));
    } else {
      adam_step<double>(params_.mlp.params(), mlp_grad_, mlp_adam_, cfg_.adam(cfg_.lr));
    }
  }

  LossValue step(const RayBatch& batch) {
    const LossValue l = evaluate(batch, true);
    if (!std::isfinite(l.total)) throw DivergenceError("loss became non-finite");
    apply_gradients();
    return l;
  }

 private:
  static constexpr std::size_t kBlockRays = 64;

  struct ScatterRecord {
    std::uint32_t slot[4];
    Real weight[4];
    Real d_occ;
    Real d_color[3];
  };

  struct BlockGrad {
    std::vector<ScatterRecord> records;
    std::vector<double> mlp;
    void clear(std::size_t mlp_size) {
      records.clear();
      mlp.assign(mlp_size, 0.0);
    }
  };

  struct SampleState {
    BilinearStencil stencil;
    std::size_t layer = 0;
    double occ = 0.0;
    std::array<double, 3> rgb{};
    double inv_depth = 0.0;
    double trans_before = 1.0;
  };

  // Packed slot of a grid cell index (layer-major to layer-innermost).
  std::size_t packed_slot(std::size_t cell) const {
    const std::size_t lc = grid_.layer_cells();
    return (cell % lc) * static_cast<std::size_t>(grid_.n_layers()) + cell / lc;
  }

  std::vector<Real> unpack(const std::vector<Real>& packed, int first, int count) const {
    std::vector<Real> out(packed.size() / 4 * count);
    for (std::size_t i = 0; i < packed.size() / 4; ++i) {
      const std::size_t slot = packed_slot(i);
      for (int c = 0; c < count; ++c) out[i * count + c] = packed[slot * 4 + first + c];
    }
    return out;
  }

  std::size_t slot(const SampleState& ss, int k) const {
    return static_cast<std::size_t>(ss.stencil.cell[k]) * static_cast<std::size_t>(grid_.n_layers()) + ss.layer;
  }

  void zero_gradients() {
    std::fill(packed_grad_.begin(), packed_grad_.end(), Real(0));
    std::fill(mlp_grad_.begin(), mlp_grad_.end(), 0.0);
  }

  /// Explicit-grid ray with its backward pass. Depth-only rays (panorama
  /// supervision) skip the color channels, which cannot affect their loss.
  template <typename Upstream, typename Emit>
  RenderResult explicit_ray(const Ray& ray, bool depth_only, bool gradients, const Upstream& upstream,
                            const Emit& emit) {
    thread_local std::vector<RaySample> samples;
    thread_local std::vector<SampleState> st;
    sample_ray_spheres(ray, grid_.schedule, samples);
    const std::size_t n = samples.size();
    const bool centered = ray.origin.squaredNorm() == 0.0;
    st.resize(n);
    RenderResult res;
    double trans = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const RaySample& s = samples[i];
      SampleState& ss = st[i];
      // Rays from the rig center meet every layer in the same direction.
      if (i == 0 || !centered) ss.stencil = grid_.stencil(s.dir.theta, s.dir.phi);
      else ss.stencil = st[0].stencil;
      ss.layer = static_cast<std::size_t>(s.layer);
      ss.trans_before = trans;
      ss.inv_depth = s.inv_depth;
      double w;
      if (depth_only) {
        double occ_l = 0.0;
        for (int k = 0; k < 4; ++k) occ_l += ss.stencil.weight[k] * packed_[slot(ss, k) * 4];
        ss.occ = sigmoid(static_cast<Real>(occ_l));
        w = ss.occ * trans;
      } else {
        std::array<double, 4> logits{};
        for (int k = 0; k < 4; ++k) {
          const Real* p = packed_.data() + slot(ss, k) * 4;
          for (int c = 0; c < 4; ++c) logits[c] += ss.stencil.weight[k] * p[c];
        }
        // Activations at grid precision.
        ss.occ = sigmoid(static_cast<Real>(logits[0]));
        for (int c = 0; c < 3; ++c) ss.rgb[c] = sigmoid(static_cast<Real>(logits[1 + c]));
        w = ss.occ * trans;
        for (int c = 0; c < 3; ++c) res.rgb[c] += w * ss.rgb[c];
      }
      res.inv_depth += w * ss.inv_depth;
      res.acc += w;
      trans *= 1.0 - ss.occ;
    }
    if (!gradients) return res;

    std::array<double, 3> d_rgb;
    double d_inv;
    upstream(res, d_rgb, d_inv);
    if (d_rgb[0] == 0.0 && d_rgb[1] == 0.0 && d_rgb[2] == 0.0 && d_inv == 0.0) return res;
    // Suffix recursion R_{k-1} = o_k g_k + (1 - o_k) R_k, back to front.
    double suffix = 0.0;
    thread_local std::vector<ScatterRecord> recs;
    recs.resize(n);
    for (std::size_t k = n; k-- > 0;) {
      const SampleState& ss = st[k];
      double gk = d_inv * ss.inv_depth;
      if (!depth_only) gk += d_rgb[0] * ss.rgb[0] + d_rgb[1] * ss.rgb[1] + d_rgb[2] * ss.rgb[2];
      const double d_occ = ss.trans_before * (gk - suffix);
      const double w = ss.occ * ss.trans_before;
      suffix = ss.occ * gk + (1.0 - ss.occ) * suffix;
      ScatterRecord& rec = recs[k];
      for (int i = 0; i < 4; ++i) {
        rec.slot[i] = static_cast<std::uint32_t>(slot(ss, i));
        rec.weight[i] = static_cast<Real>(ss.stencil.weight[i]);
      }
      rec.d_occ = static_cast<Real>(d_occ * ss.occ * (1.0 - ss.occ));
      for (int c = 0; c < 3; ++c)
        rec.d_color[c] = depth_only ? Real(0) : static_cast<Real>(w * d_rgb[c] * ss.rgb[c] * (1.0 - ss.rgb[c]));
    }
    for (std::size_t k = 0; k < n; ++k) emit(recs[k]);
    return res;
  }

  template <typename Upstream>
  RenderResult mlp_ray(const Ray& ray, bool gradients, const Upstream& upstream, std::span<double> grad) {
    thread_local std::vector<RaySample> samples;
    thread_local std::vector<QueryContext> queries;
    thread_local std::vector<FieldTape> tapes;
    sample_ray_spheres(ray, grid_.schedule, samples);
    const std::size_t n = samples.size();
    queries.resize(n);
    tapes.resize(n);
    std::vector<double> occ(n), inv(n);
    std::vector<std::array<double, 3>> rgb(n);
    for (std::size_t i = 0; i < n; ++i) {
      queries[i] = make_query(grid_, sources_, ray, samples[i], true);
      const FieldOutput o = eval(params_, queries[i], &tapes[i]);
      occ[i] = o.occupancy;
      rgb[i] = o.rgb;
      inv[i] = samples[i].inv_depth;
    }
    const RenderResult res = composite(occ, rgb, inv);
    if (!gradients) return res;
    std::array<double, 3> d_rgb;
    double d_inv;
    upstream(res, d_rgb, d_inv);
    const CompositeGradient cg = composite_backward(occ, rgb, inv, d_rgb, d_inv, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      eval_with_gradients(params_, queries[i], cg.d_occ[i], cg.d_rgb[i], grad, &tapes[i]);
    return res;
  }

  void accumulate(const ScatterRecord& rec) {
    for (int i = 0; i < 4; ++i) {
      const Real w = rec.weight[i];
      Real* g = packed_grad_.data() + static_cast<std::size_t>(rec.slot[i]) * 4;
      g[0] += w * rec.d_occ;
      for (int c = 0; c < 3; ++c) g[1 + c] += w * rec.d_color[c];
    }
  }

  void reduce_blocks() {
    for (const auto& blk : blocks_) {
      for (const auto& rec : blk.records) accumulate(rec);
      for (std::size_t i = 0; i < blk.mlp.size(); ++i) mlp_grad_[i] += blk.mlp[i];
    }
  }

  MsiGrid<Real>& grid_;
  FieldParams& params_;
  const SourceViews* sources_;
  TrainConfig cfg_;
  std::vector<Real> packed_, packed_grad_;  // per cell: occ, r, g, b
  std::vector<double> mlp_grad_;
  AdamState<Real> packed_adam_;
  AdamState<double> mlp_adam_;
  std::vector<RenderResult> results_;
  std::vector<BlockGrad> blocks_;
};

struct FitOptions {
  // Called after each iteration with the recorded loss.
  std::function<void(const LossRecord&)> on_iteration;
};

inline SourceViews source_views(const SampleBundle& b) { return {b.cameras, b.fisheye_images, b.fisheye_valid}; }

/// Per-scene fit: sample, render, loss, gradients, Adam; one loss record per
/// iteration (the batch loss before that iteration's update).
template <typename Real>
std::vector<LossRecord> fit(const SampleBundle& bundle, MsiGrid<Real>& grid, FieldParams& params,
                            const TrainConfig& cfg, const FitOptions& opts = {}) {
  const SourceViews sources = source_views(bundle);
  Trainer<Real> trainer(grid, params, &sources, cfg);
  RaySampler sampler(bundle);
  std::mt19937_64 rng(cfg.seed);
  std::vector<LossRecord> history;
  history.reserve(cfg.iterations);
  for (int it = 0; it < cfg.iterations; ++it) {
    const RayBatch batch = sampler.sample(cfg.n_fisheye_rays, cfg.n_panorama_rays, rng);
    LossRecord rec{it, trainer.step(batch)};
    history.push_back(rec);
    if (opts.on_iteration) opts.on_iteration(rec);
  }
  trainer.write_back();
  if (trainer.skipped_steps() > 0)
    std::cerr << "fit: skipped " << trainer.skipped_steps() << " update(s) with non-finite gradients\n";
  return history;
}

}  // namespace omsi
