#pragma once

// Inverse-depth error statistics and image quality (PSNR, SSIM).

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "omsi/image.hpp"

namespace omsi {

struct DepthReport {
  double mae = 0.0;   // m^-1
  double rmse = 0.0;  // m^-1
  // Percent of valid pixels whose absolute inverse-depth error exceeds k.
  double ratio_gt_0_1 = 0.0;
  double ratio_gt_0_3 = 0.0;
  double ratio_gt_0_5 = 0.0;
  std::size_t valid_pixels = 0;
};

struct ImageReport {
  double psnr = 0.0;  // dB
  double ssim = 0.0;
};

inline constexpr double kPsnrCap = 99.0;

/// Pixels with a zero mask entry are ignored; an empty mask selects all.
inline DepthReport depth_metrics(const ImageGray& pred, const ImageGray& gt, const Mask& valid = {}) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("depth_metrics: size mismatch");
  if (!valid.empty() && valid.size() != gt.pixel_count()) throw std::invalid_argument("depth_metrics: mask size mismatch");
  DepthReport r;
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0, c1 = 0, c3 = 0, c5 = 0;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (!valid.empty() && !valid[i]) continue;
    const double e = std::abs(static_cast<double>(pred.data[i]) - gt.data[i]);
    sum += e;
    sq += e * e;
    c1 += e > 0.1;
    c3 += e > 0.3;
    c5 += e > 0.5;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("depth_metrics: no valid pixels");
  const double dn = static_cast<double>(n);
  r.mae = sum / dn;
  r.rmse = std::sqrt(sq / dn);
  r.ratio_gt_0_1 = 100.0 * c1 / dn;
  r.ratio_gt_0_3 = 100.0 * c3 / dn;
  r.ratio_gt_0_5 = 100.0 * c5 / dn;
  r.valid_pixels = n;
  return r;
}

/// Mask of pixels with finite ground truth (inverse depth > 0).
inline Mask finite_depth_mask(const ImageGray& gt) {
  Mask m(gt.pixel_count());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = gt.data[i] > 0.0f ? 1 : 0;
  return m;
}

template <int C>
double psnr(const Image<C>& a, const Image<C>& b) {
  if (!a.same_shape(b) || a.empty()) throw std::invalid_argument("psnr: size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace detail {

inline std::array<double, 11> ssim_gaussian() {
  std::array<double, 11> g{};
  double s = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double x = i - 5;
    g[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable 11x11 Gaussian filter, "valid" region only.
inline std::vector<double> filter_valid(const std::vector<double>& img, int w, int h) {
  static const auto g = ssim_gaussian();
  const int ow = w - 10, oh = h - 10;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < 11; ++k) s += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < 11; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over channels and window positions: 11x11 Gaussian window,
/// sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1.
template <int C>
double ssim(const Image<C>& a, const Image<C>& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: size mismatch");
  if (a.width < 11 || a.height < 11) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = a.data[i * C + c];
      y[i] = b.data[i * C + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h), my = detail::filter_valid(y, w, h);
    const auto sxx = detail::filter_valid(xx, w, h), syy = detail::filter_valid(yy, w, h),
               sxy = detail::filter_valid(xy, w, h);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace omsi
