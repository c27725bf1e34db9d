#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "contour.hpp"
#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "parallel.hpp"
#include "st_space.hpp"

namespace ribsupp {

// Per-rib hyperparameters.
struct SuppressionParams {
  double kappa_t = 15.0;  // Gaussian sigma along t, pixels of arc length
  double tau = 0.5;       // centerline ratio threshold
  int k_center = 5;       // centerline averaging window
  double s_b = 3.0;       // border band depth, pixels
  int k_border = 5;       // border blending neighbour count

  void validate() const {
    if (!(kappa_t > 0.0)) throw ConfigError("kappa_t must be > 0");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (k_center < 1) throw ConfigError("k_center must be >= 1");
    if (!(s_b >= 0.0)) throw ConfigError("s_b must be >= 0");
    if (k_border < 1) throw ConfigError("k_border must be >= 1");
  }
  friend bool operator==(const SuppressionParams&, const SuppressionParams&) = default;
};

// How smoothed differences are summed back along s.
enum class ReintegrationRule {
  // out(s) = out(s-1) + g(s): each difference g(s) = f(s) - f(s-1) is the
  // midpoint value of its unit step, so differentiation is inverted exactly.
  midpoint,
  // out(s) = out(s-1) + (g(s) + g(s-1)) / 2.
  trapezoid,
};

// Which side of the ratio test keeps the reintegrated value.
enum class CenterlineGate {
  keep_above,  // keep when f(s)/f(s-1) > tau, average otherwise
  keep_below,  // keep when f(s)/f(s-1) <= tau, average otherwise
};

enum class BackprojectionMode {
  splat,   // bilinear splatting of ST cells, weight-normalized
  gather,  // per-pixel interpolation of the field at forward_st(pixel)
};

// Pipeline settings that are not searched by the tuner.
struct SuppressionOptions {
  double dt = 0.5;
  double ds = 0.5;
  // Regularization of the lattice mask contour into the smooth contour that
  // defines ST-space. sigma 0 uses the lattice contour as is.
  ContourFit contour_fit{};
  DepthTolerance depth_tolerance{};
  ReintegrationRule rule = ReintegrationRule::midpoint;
  CenterlineGate gate = CenterlineGate::keep_above;
  BackprojectionMode backprojection = BackprojectionMode::gather;
  int threads = 1;
  bool keep_fields = false;
};

// ---------------------------------------------------------------------------
// ST-space stages. All are out-of-place and leave invalid cells as NaN.

inline STField derivative_s(const STField& f) {
  STField out(f.layout_ptr());
  for (std::size_t j = 0; j < f.columns(); ++j) {
    out.at(j, 0) = 0.0;
    for (std::size_t k = 1; k < f.valid_rows(j); ++k) out.at(j, k) = f.at(j, k) - f.at(j, k - 1);
  }
  return out;
}

// Cyclic Gaussian along t, truncated at +-4 sigma. Row s only mixes columns
// that reach depth s; the kernel is renormalized over those columns.
inline STField smooth_t(const STField& f, double kappa_t, int threads = 1) {
  if (!(kappa_t > 0.0)) throw ConfigError("kappa_t must be > 0");
  const std::size_t T = f.columns();
  const double sigma = kappa_t / f.dt();
  const long long radius = static_cast<long long>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (long long m = -radius; m <= radius; ++m)
    kernel[static_cast<std::size_t>(m + radius)] = std::exp(-0.5 * (m * m) / (sigma * sigma));

  STField out(f.layout_ptr());
  const long long TT = static_cast<long long>(T);
  parallel_for(f.rows(), threads, [&](std::size_t k) {
    std::vector<double> row(T), ok(T);
    for (std::size_t j = 0; j < T; ++j) {
      ok[j] = f.valid(j, k) ? 1.0 : 0.0;
      row[j] = f.valid(j, k) ? f.at(j, k) : 0.0;
    }
    for (std::size_t j = 0; j < T; ++j) {
      if (ok[j] == 0.0) continue;
      double acc = 0.0, wsum = 0.0;
      for (long long m = -radius; m <= radius; ++m) {
        long long q = (static_cast<long long>(j) + m) % TT;
        if (q < 0) q += TT;
        const double w = kernel[static_cast<std::size_t>(m + radius)] * ok[static_cast<std::size_t>(q)];
        acc += w * row[static_cast<std::size_t>(q)];
        wsum += w;
      }
      out.at(j, k) = acc / wsum;
    }
  });
  return out;
}

inline STField reintegrate(const STField& g, ReintegrationRule rule = ReintegrationRule::midpoint) {
  STField out(g.layout_ptr());
  for (std::size_t j = 0; j < g.columns(); ++j) {
    out.at(j, 0) = 0.0;
    for (std::size_t k = 1; k < g.valid_rows(j); ++k) {
      const double step = rule == ReintegrationRule::midpoint ? g.at(j, k)
                                                              : 0.5 * (g.at(j, k) + g.at(j, k - 1));
      out.at(j, k) = out.at(j, k - 1) + step;
    }
  }
  return out;
}

// KNN smoothing along s, evaluated on the input values only. A near-zero
// denominator counts as failing the ratio test.
inline STField centerline_smooth(const STField& f, double tau, int k_center,
                                 CenterlineGate gate = CenterlineGate::keep_above) {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (k_center < 1) throw ConfigError("k_center must be >= 1");
  STField out(f.layout_ptr());
  for (std::size_t j = 0; j < f.columns(); ++j) {
    const std::size_t n = f.valid_rows(j);
    out.at(j, 0) = f.at(j, 0);
    for (std::size_t i = 1; i < n; ++i) {
      const double cur = f.at(j, i), prev = f.at(j, i - 1);
      const bool above = std::abs(prev) > 1e-12 && cur / prev > tau;
      const bool keep = gate == CenterlineGate::keep_above ? above : !above;
      if (keep) {
        out.at(j, i) = cur;
        continue;
      }
      const std::size_t lo = i + 1 >= static_cast<std::size_t>(k_center) ? i + 1 - k_center : 0;
      double acc = 0.0;
      for (std::size_t m = lo; m <= i; ++m) acc += f.at(j, m);
      out.at(j, i) = acc / static_cast<double>(i - lo + 1);
    }
  }
  return out;
}

inline STField clamp_nonneg(const STField& f) {
  STField out(f.layout_ptr());
  for (std::size_t j = 0; j < f.columns(); ++j)
    for (std::size_t k = 0; k < f.valid_rows(j); ++k) out.at(j, k) = std::max(f.at(j, k), 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Per-rib geometry that does not depend on image values or parameters.

struct InteriorPixel {
  int x = 0;
  int y = 0;
  STCoord st;
};

struct RibGeometry {
  int label = 0;
  std::shared_ptr<const STLayout> layout;
  std::vector<InteriorPixel> interior;  // pixel centers strictly inside, scanline order

  const Contour& contour() const { return layout->contour; }
};

inline RibGeometry prepare_rib(const RibMask& mask, const SuppressionOptions& opt = {}) {
  const int W = mask.bitmap.width, H = mask.bitmap.height;
  RibGeometry g;
  g.label = mask.label;
  Contour c = regularize_contour(mask.contour, opt.contour_fit);
  double x0, y0, x1, y1;
  c.bounds(x0, y0, x1, y1);
  // the lattice contour is inside the image; only the fit can overshoot
  if (x0 < 0.0 || y0 < 0.0 || x1 > W || y1 > H) {
    std::vector<Vec2> v = c.vertices();
    for (Vec2& p : v) p = {std::clamp(p.x, 0.0, double(W)), std::clamp(p.y, 0.0, double(H))};
    c = Contour(std::move(v));
    c.bounds(x0, y0, x1, y1);
  }
  g.layout = std::make_shared<const STLayout>(make_layout(c, opt.dt, opt.ds, opt.threads, opt.depth_tolerance));

  const int px0 = std::max(0, static_cast<int>(std::floor(x0)));
  const int py0 = std::max(0, static_cast<int>(std::floor(y0)));
  const int px1 = std::min(W - 1, static_cast<int>(std::ceil(x1)));
  const int py1 = std::min(H - 1, static_cast<int>(std::ceil(y1)));
  const std::size_t nrows = py1 >= py0 ? static_cast<std::size_t>(py1 - py0 + 1) : 0;
  std::vector<std::vector<InteriorPixel>> per_row(nrows);
  parallel_for(nrows, opt.threads, [&](std::size_t r) {
    const int y = py0 + static_cast<int>(r);
    for (int x = px0; x <= px1; ++x) {
      const Vec2 p{x + 0.5, y + 0.5};
      if (!c.contains(p)) continue;
      const ContourHit hit = c.nearest(p);
      if (!(hit.distance > 0.0)) continue;
      per_row[r].push_back({x, y, {hit.distance, hit.t}});
    }
  });
  for (auto& row : per_row) g.interior.insert(g.interior.end(), row.begin(), row.end());
  return g;
}

inline std::vector<RibGeometry> prepare_ribs(const RibMaskSet& set, const SuppressionOptions& opt = {}) {
  std::vector<RibGeometry> out;
  out.reserve(set.size());
  for (const auto& m : set.masks) out.push_back(prepare_rib(m, opt));
  return out;
}

// Bone estimate of one rib over its bounding box.
struct BonePatch {
  int label = 0;
  int x0 = 0;
  int y0 = 0;
  Image values;               // >= 0
  std::vector<double> weight; // > 0 where the rib covers the pixel

  double at_global(int x, int y) const {
    const int lx = x - x0, ly = y - y0;
    return values.contains(lx, ly) ? values(lx, ly) : 0.0;
  }
};

struct RibOutcome {
  BonePatch bone;
  std::optional<STField> field;  // final ST-space bone field (debug)
};

// Bone field in ST-space: sample -> d/ds -> smooth along t -> reintegrate ->
// centerline smoothing -> clamp at zero.
inline STField bone_field(const Image& img, const RibGeometry& geo, const SuppressionParams& p,
                          const SuppressionOptions& opt) {
  const STField sampled = sample_field(img, geo.layout, opt.threads);
  const STField smoothed = smooth_t(derivative_s(sampled), p.kappa_t, opt.threads);
  const STField integrated = reintegrate(smoothed, opt.rule);
  return clamp_nonneg(centerline_smooth(integrated, p.tau, p.k_center, opt.gate));
}

inline RibOutcome suppress_rib(const Image& img, const RibGeometry& geo, const SuppressionParams& p,
                               const SuppressionOptions& opt = {}) {
  p.validate();
  STField field = bone_field(img, geo, p, opt);

  double x0, y0, x1, y1;
  geo.contour().bounds(x0, y0, x1, y1);
  const int bx0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
  const int by0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
  const int bx1 = std::min(img.width() - 1, static_cast<int>(std::ceil(x1)) + 1);
  const int by1 = std::min(img.height() - 1, static_cast<int>(std::ceil(y1)) + 1);

  RibOutcome out;
  BonePatch& bone = out.bone;
  bone.label = geo.label;
  bone.x0 = bx0;
  bone.y0 = by0;
  const int pw = bx1 - bx0 + 1, ph = by1 - by0 + 1;
  bone.values = Image(pw, ph, img.max_value(), 0.0);
  bone.weight.assign(static_cast<std::size_t>(pw) * ph, 0.0);

  if (opt.backprojection == BackprojectionMode::gather) {
    for (const InteriorPixel& ip : geo.interior) {
      const int lx = ip.x - bx0, ly = ip.y - by0;
      bone.values(lx, ly) = interpolate_field(field, ip.st);
      bone.weight[bone.values.index(lx, ly)] = 1.0;
    }
  } else {
    const BackProjection bp = backproject(field, img.width(), img.height(), img.max_value());
    for (int y = by0; y <= by1; ++y)
      for (int x = bx0; x <= bx1; ++x) {
        const std::size_t gi = bp.values.index(x, y);
        if (bp.weights[gi] <= 0.0) continue;
        bone.values(x - bx0, y - by0) = bp.values(x, y);
        bone.weight[bone.values.index(x - bx0, y - by0)] = bp.weights[gi];
      }
  }
  if (opt.keep_fields) out.field = std::move(field);
  return out;
}

// Subtracts a bone patch where it covers the image.
inline void subtract_bone(Image& soft, const BonePatch& bone) {
  for (int ly = 0; ly < bone.values.height(); ++ly)
    for (int lx = 0; lx < bone.values.width(); ++lx) {
      const std::size_t li = bone.values.index(lx, ly);
      if (bone.weight[li] > 0.0) soft(bone.x0 + lx, bone.y0 + ly) -= bone.values.pixels()[li];
    }
}

// Convenience form taking a mask directly: returns (soft, bone).
inline std::pair<Image, BonePatch> suppress_rib(const Image& img, const RibMask& mask,
                                                const SuppressionParams& p,
                                                const SuppressionOptions& opt = {}) {
  const RibGeometry geo = prepare_rib(mask, opt);
  RibOutcome r = suppress_rib(img, geo, p, opt);
  Image soft = img;
  subtract_bone(soft, r.bone);
  return {std::move(soft), std::move(r.bone)};
}

// ---------------------------------------------------------------------------
// Border blending

struct Offset {
  int dx = 0;
  int dy = 0;
};

// Pixel offsets ordered by distance, ties in scanline order (dy, then dx).
inline std::vector<Offset> neighbour_offsets(int radius) {
  std::vector<Offset> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) out.push_back({dx, dy});
  std::stable_sort(out.begin(), out.end(), [](Offset a, Offset b) {
    const int da = a.dx * a.dx + a.dy * a.dy, db = b.dx * b.dx + b.dy * b.dy;
    if (da != db) return da < db;
    if (a.dy != b.dy) return a.dy < b.dy;
    return a.dx < b.dx;
  });
  return out;
}

// Replaces every pixel of the band s <= s_b (interior pixels only) with the
// mean of its k nearest pixels read from the unblended image.
inline Image blend_border(const Image& soft, const RibGeometry& geo, double s_b, int k_border) {
  if (!(s_b >= 0.0)) throw ConfigError("s_b must be >= 0");
  if (k_border < 1) throw ConfigError("k_border must be >= 1");
  Image out = soft;
  if (k_border == 1 || s_b == 0.0) return out;
  const int radius = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(k_border)))) + 1;
  std::vector<Offset> offsets = neighbour_offsets(radius);
  const long long avail = static_cast<long long>(soft.width()) * soft.height();
  const int want = static_cast<int>(std::min<long long>(k_border, avail));
  for (const InteriorPixel& ip : geo.interior) {
    if (ip.st.s > s_b) continue;
    double acc = 0.0;
    int used = 0;
    int r = radius;
    for (std::size_t q = 0; used < want; ++q) {
      if (q == offsets.size()) {
        r *= 2;
        offsets = neighbour_offsets(r);
        acc = 0.0;
        used = 0;
        q = 0;
      }
      const int x = ip.x + offsets[q].dx, y = ip.y + offsets[q].dy;
      if (!soft.contains(x, y)) continue;
      acc += soft(x, y);
      ++used;
    }
    out(ip.x, ip.y) = acc / used;
  }
  return out;
}

inline Image blend_border(const Image& soft, const RibMask& mask, double s_b, int k_border,
                          const SuppressionOptions& opt = {}) {
  return blend_border(soft, prepare_rib(mask, opt), s_b, k_border);
}

// ---------------------------------------------------------------------------
// Whole rib cage

struct SuppressionResult {
  Image soft;            // final: blended and clamped to [0, max_value]
  Image soft_pre_blend;  // input minus all bone patches
  std::vector<BonePatch> bones;
  std::vector<STField> fields;  // filled when options.keep_fields
};

inline void check_shapes(const Image& img, const RibMaskSet& masks) {
  for (const auto& m : masks.masks)
    if (m.bitmap.width != img.width() || m.bitmap.height != img.height())
      throw ShapeError("mask shape " + std::to_string(m.bitmap.width) + "x" +
                       std::to_string(m.bitmap.height) + " differs from image shape " +
                       img.shape_string());
}

// Ribs run sequentially on the running soft estimate, in the given order;
// border blending then runs once per rib in the same order.
inline SuppressionResult suppress_all(const Image& img, const std::vector<RibGeometry>& ribs,
                                      const std::vector<SuppressionParams>& params,
                                      const SuppressionOptions& opt = {}) {
  if (params.size() != ribs.size())
    throw ConfigError("expected " + std::to_string(ribs.size()) + " parameter sets, got " +
                      std::to_string(params.size()));
  SuppressionResult res;
  res.soft_pre_blend = img;
  for (std::size_t i = 0; i < ribs.size(); ++i) {
    try {
      RibOutcome r = suppress_rib(res.soft_pre_blend, ribs[i], params[i], opt);
      subtract_bone(res.soft_pre_blend, r.bone);
      res.bones.push_back(std::move(r.bone));
      if (r.field) res.fields.push_back(std::move(*r.field));
    } catch (const MaskError&) {
      throw;
    } catch (const Error& e) {
      throw MaskError(ribs[i].label, e.what());
    }
  }
  res.soft = res.soft_pre_blend;
  for (std::size_t i = 0; i < ribs.size(); ++i)
    res.soft = blend_border(res.soft, ribs[i], params[i].s_b, params[i].k_border);
  res.soft.clamp_to_range();
  return res;
}

inline SuppressionResult suppress_all(const Image& img, const RibMaskSet& masks,
                                      const std::vector<SuppressionParams>& params,
                                      const SuppressionOptions& opt = {}) {
  check_shapes(img, masks);
  return suppress_all(img, prepare_ribs(masks, opt), params, opt);
}

inline SuppressionResult suppress_all(const Image& img, const RibMaskSet& masks,
                                      const SuppressionParams& params,
                                      const SuppressionOptions& opt = {}) {
  return suppress_all(img, masks, std::vector<SuppressionParams>(masks.size(), params), opt);
}

}  // namespace ribsupp
