#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace ribsupp {

namespace detail {
inline void require_same_shape(const Image& x, const Image& y) {
  if (!x.same_shape(y))
    throw ShapeError("shape mismatch: " + x.shape_string() + " vs " + y.shape_string());
}
}  // namespace detail

inline double mse(const Image& x, const Image& y) {
  detail::require_same_shape(x, y);
  if (x.empty()) return 0.0;
  double acc = 0.0;
  auto a = x.pixels(), b = y.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

inline double rmse(const Image& x, const Image& y) { return std::sqrt(mse(x, y)); }

// RMSE restricted to pixels where mask is set.
inline double rmse(const Image& x, const Image& y, const Bitmap& mask) {
  detail::require_same_shape(x, y);
  double acc = 0.0;
  std::size_t n = 0;
  auto a = x.pixels(), b = y.pixels();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask.bits[i]) {
      acc += (a[i] - b[i]) * (a[i] - b[i]);
      ++n;
    }
  return n ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
}

// Mean absolute difference.
inline double l1(const Image& x, const Image& y) {
  detail::require_same_shape(x, y);
  if (x.empty()) return 0.0;
  double acc = 0.0;
  auto a = x.pixels(), b = y.pixels();
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

// log10(max_x^2 / MSE), without the usual factor 10. Identical images give
// +infinity.
inline double psnr(const Image& x, const Image& y, double max_x) {
  const double m = mse(x, y);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return std::log10(max_x * max_x / m);
}

inline double psnr_db(const Image& x, const Image& y, double max_x) { return 10.0 * psnr(x, y, max_x); }

// ---------------------------------------------------------------------------
// Multi-scale SSIM

struct MsSsimConfig {
  std::array<double, 5> sigmas{0.5, 1.0, 2.0, 4.0, 8.0};  // window sigma per scale
  int window = 11;
  double k1 = 0.01;
  double k2 = 0.03;
};

inline int ms_ssim_min_size(const MsSsimConfig& cfg = {}) {
  return (1 << (static_cast<int>(cfg.sigmas.size()) - 1)) * cfg.window;
}

namespace detail {

struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double& operator()(int x, int y) { return v[static_cast<std::size_t>(y) * w + x]; }
  double operator()(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline std::vector<double> gaussian_window(double sigma, int size) {
  std::vector<double> k(size);
  double total = 0.0;
  const double c = 0.5 * (size - 1);
  for (int i = 0; i < size; ++i) total += k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
  for (double& v : k) v /= total;
  return k;
}

// Separable 'valid' filtering: output is (w - n + 1) x (h - n + 1).
inline Plane filter_valid(const Plane& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  Plane tmp{in.w - n + 1, in.h, {}};
  tmp.v.assign(static_cast<std::size_t>(tmp.w) * tmp.h, 0.0);
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * in(x + i, y);
      tmp(x, y) = acc;
    }
  Plane out{tmp.w, in.h - n + 1, {}};
  out.v.assign(static_cast<std::size_t>(out.w) * out.h, 0.0);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[i] * tmp(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

inline Plane downsample2(const Plane& in) {
  Plane out{in.w / 2, in.h / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out(x, y) = 0.25 * (in(2 * x, 2 * y) + in(2 * x + 1, 2 * y) + in(2 * x, 2 * y + 1) +
                          in(2 * x + 1, 2 * y + 1));
  return out;
}

}  // namespace detail

// Luminance term at the coarsest scale times the product of the per-scale
// contrast-structure terms (all exponents 1). c1 = (k1 S)^2, c2 = (k2 S)^2.
inline double ms_ssim(const Image& x, const Image& y, double max_x, const MsSsimConfig& cfg = {}) {
  detail::require_same_shape(x, y);
  const int min_size = ms_ssim_min_size(cfg);
  if (std::min(x.width(), x.height()) < min_size)
    throw DomainError("image " + x.shape_string() + " too small for " +
                      std::to_string(cfg.sigmas.size()) + "-scale MS-SSIM; minimum is " +
                      std::to_string(min_size) + "x" + std::to_string(min_size));
  const double c1 = (cfg.k1 * max_x) * (cfg.k1 * max_x);
  const double c2 = (cfg.k2 * max_x) * (cfg.k2 * max_x);

  detail::Plane a{x.width(), x.height(), x.data()};
  detail::Plane b{y.width(), y.height(), y.data()};
  double product = 1.0;
  double luminance = 1.0;
  for (std::size_t j = 0; j < cfg.sigmas.size(); ++j) {
    if (j > 0) {
      a = detail::downsample2(a);
      b = detail::downsample2(b);
    }
    const auto k = detail::gaussian_window(cfg.sigmas[j], cfg.window);
    detail::Plane aa = a, bb = b, ab = a;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
      aa.v[i] = a.v[i] * a.v[i];
      bb.v[i] = b.v[i] * b.v[i];
      ab.v[i] = a.v[i] * b.v[i];
    }
    const auto mu_a = detail::filter_valid(a, k), mu_b = detail::filter_valid(b, k);
    const auto e_aa = detail::filter_valid(aa, k), e_bb = detail::filter_valid(bb, k);
    const auto e_ab = detail::filter_valid(ab, k);
    double cs = 0.0, lum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
      const double ma = mu_a.v[i], mb = mu_b.v[i];
      const double va = e_aa.v[i] - ma * ma, vb = e_bb.v[i] - mb * mb, cov = e_ab.v[i] - ma * mb;
      cs += (2.0 * cov + c2) / (va + vb + c2);
      lum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    }
    const double n = static_cast<double>(mu_a.v.size());
    product *= cs / n;
    if (j + 1 == cfg.sigmas.size()) luminance = lum / n;
  }
  return luminance * product;
}

// ---------------------------------------------------------------------------
// Combined loss

struct LossWeights {
  double alpha = 0.75;
  double beta = 0.25;
};

// -alpha * L_PSNR + (1 - alpha) * [beta * (1 - ms_ssim) + (1 - beta) * L1].
// Identical images give -infinity (infinite PSNR) whenever alpha > 0.
inline double combined_loss(const Image& x, const Image& y, double max_x, LossWeights w = {}) {
  const double p = psnr(x, y, max_x);
  const double rest = w.beta * (1.0 - ms_ssim(x, y, max_x)) + (1.0 - w.beta) * l1(x, y);
  if (w.alpha == 0.0) return rest;
  if (std::isinf(p)) return -std::numeric_limits<double>::infinity();
  if (w.alpha == 1.0) return -p;
  return -w.alpha * p + (1.0 - w.alpha) * rest;
}

struct MetricsReport {
  double rmse = 0.0;
  double psnr_log = 0.0;  // log10(max^2/MSE); +inf for identical inputs
  double psnr_db = 0.0;
  double ms_ssim = 0.0;   // NaN when the images are too small
  double l1 = 0.0;
  double combined = 0.0;
  LossWeights weights{};
};

inline MetricsReport evaluate(const Image& x, const Image& y, double max_x, LossWeights w = {}) {
  MetricsReport r;
  r.weights = w;
  r.rmse = rmse(x, y);
  r.l1 = l1(x, y);
  r.psnr_log = psnr(x, y, max_x);
  r.psnr_db = 10.0 * r.psnr_log;
  if (std::min(x.width(), x.height()) >= ms_ssim_min_size()) {
    r.ms_ssim = ms_ssim(x, y, max_x);
    r.combined = combined_loss(x, y, max_x, w);
  } else {
    r.ms_ssim = std::numeric_limits<double>::quiet_NaN();
    r.combined = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace ribsupp
