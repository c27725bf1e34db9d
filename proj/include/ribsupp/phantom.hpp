#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "contour.hpp"
#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"

namespace ribsupp {

enum class BackgroundKind { constant, low_frequency };

struct PhantomSpec {
  int width = 512;
  int height = 512;
  int n_ribs = 20;
  double max_value = 65535.0;
  double rib_amplitude = 6553.5;  // A
  double rib_width = 18.0;        // full width; half-width w = rib_width / 2
  double rib_gap = 6.0;           // minimum vertical clearance between neighbouring ribs
  BackgroundKind background = BackgroundKind::constant;
  double background_level = 22000.0;
  double background_amplitude = 0.0;     // peak deviation of the low-frequency field
  double background_wavelength = 128.0;  // shortest wavelength present (lambda)
  int vessel_count = 0;
  double vessel_sigma = 1.2;     // Gaussian cross-section sigma, pixels
  double vessel_contrast = 0.0;
  int nodule_count = 0;
  double nodule_diameter = 12.0;
  double nodule_contrast = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (width < 32 || height < 32) throw ConfigError("phantom must be at least 32x32");
    if (n_ribs < 0) throw ConfigError("n_ribs must be >= 0");
    if (!(rib_width >= 4.0)) throw ConfigError("rib_width must be >= 4");
    if (!(rib_amplitude >= 0.0)) throw ConfigError("rib_amplitude must be >= 0");
    if (!(max_value > 0.0)) throw ConfigError("max_value must be > 0");
    if (!(background_wavelength > 0.0)) throw ConfigError("background_wavelength must be > 0");
  }
};

// Bone profile across a rib: b(0) = 0, b(1) = 1, flat beyond 1.
inline double rib_profile(double u) {
  return 0.5 * (1.0 - std::cos(std::numbers::pi * std::min(std::max(u, 0.0), 1.0)));
}

// Exact distance from p to the closest contour segment. Deliberately
// self-contained so it can serve as an oracle for the ST-space code.
inline double distance_to_contour(Vec2 p, const Contour& c) {
  const auto& v = c.vertices();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i], b = v[(i + 1) % v.size()];
    const double ex = b.x - a.x, ey = b.y - a.y;
    const double px = p.x - a.x, py = p.y - a.y;
    const double len2 = ex * ex + ey * ey;
    double u = len2 > 0.0 ? (px * ex + py * ey) / len2 : 0.0;
    u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
    best = std::min(best, std::hypot(px - u * ex, py - u * ey));
  }
  return best;
}

// One rib strip: an arc of the circle (center, radius) between two angles,
// thickened by half_width on both sides.
struct RibArc {
  int label = 0;
  Vec2 center;
  double radius = 0.0;
  double half_width = 0.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  Contour contour;
};

struct PhantomCase {
  Image raw;
  Image gt_soft;
  Image gt_bone;
  RibMaskSet masks;
  std::vector<RibArc> ribs;
  PhantomSpec spec;
};

namespace detail {

class PhantomRng {
 public:
  explicit PhantomRng(std::uint64_t seed) : engine_(seed) {}
  // 53-bit uniform in [0, 1); avoids implementation-defined distributions.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

// Values on a 2^-16 grid add and subtract exactly for magnitudes < 2^36.
inline double dyadic(double v) { return std::nearbyint(v * 65536.0) / 65536.0; }

inline Contour arc_strip_polygon(Vec2 center, double radius, double hw, double th0, double th1) {
  std::vector<Vec2> pts;
  const auto arc = [&](double r, bool forward) {
    const int n = std::max(8, static_cast<int>(std::ceil(r * (th1 - th0) / 1.0)));
    for (int i = 0; i <= n; ++i) {
      const double a = forward ? th0 + (th1 - th0) * i / n : th1 - (th1 - th0) * i / n;
      pts.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
    }
  };
  arc(radius + hw, true);
  arc(radius - hw, false);
  return Contour::counterclockwise(std::move(pts));
}

}  // namespace detail

inline PhantomCase generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  detail::PhantomRng rng(spec.seed);
  const int W = spec.width, H = spec.height;
  const double hw = 0.5 * spec.rib_width;
  PhantomCase pc;
  pc.spec = spec;

  // --- rib layout: two columns of arches, superior to inferior.
  const int levels = (spec.n_ribs + 1) / 2;
  const double chord = 0.30 * W;
  const double top = 0.06 * H, bottom = 0.94 * H;
  const double r_min = 1.2 * chord, r_max = 2.0 * chord;
  const double worst_sag = r_min - std::sqrt(r_min * r_min - 0.25 * chord * chord);
  const double extent = worst_sag + spec.rib_width + 2.0;
  if (levels > 0) {
    const double pitch = (bottom - top) / levels;
    if (extent + spec.rib_gap > pitch) {
      const int fit = static_cast<int>(std::floor((bottom - top) / (extent + spec.rib_gap)));
      throw ConfigError("cannot fit " + std::to_string(spec.n_ribs) +
                        " non-overlapping ribs; achievable max is " + std::to_string(2 * fit));
    }
    for (int lv = 0; lv < levels; ++lv) {
      const double slack = pitch - extent - spec.rib_gap;
      for (int side = 0; side < 2; ++side) {
        const int label = 2 * lv + side + 1;
        if (label > spec.n_ribs) break;
        RibArc rib;
        rib.label = label;
        rib.radius = rng.uniform(r_min, r_max);
        rib.half_width = hw;
        const double half_angle = std::asin(0.5 * chord / rib.radius);
        const double sag = rib.radius - rib.radius * std::cos(half_angle);
        const double x_mid = (side == 0 ? 0.27 : 0.73) * W + rng.uniform(-0.02, 0.02) * W;
        const double y_apex = top + lv * pitch + 0.5 * spec.rib_gap + hw + 1.0 +
                              rng.uniform(0.0, std::max(0.0, slack)) + (worst_sag - sag) * 0.5;
        rib.center = {x_mid, y_apex + rib.radius};
        rib.theta0 = -0.5 * std::numbers::pi - half_angle;
        rib.theta1 = -0.5 * std::numbers::pi + half_angle;
        rib.contour = detail::arc_strip_polygon(rib.center, rib.radius, hw, rib.theta0, rib.theta1);
        pc.ribs.push_back(std::move(rib));
      }
    }
  }

  // --- soft tissue: background plus distractors.
  pc.gt_soft = Image(W, H, spec.max_value, spec.background_level);
  if (spec.background == BackgroundKind::low_frequency && spec.background_amplitude != 0.0) {
    constexpr int kWaves = 8;
    struct Wave {
      double kx, ky, phase;
    };
    std::vector<Wave> waves;
    for (int i = 0; i < kWaves; ++i) {
      const double lambda = rng.uniform(spec.background_wavelength, 2.0 * spec.background_wavelength);
      const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double k = 2.0 * std::numbers::pi / lambda;
      waves.push_back({k * std::cos(dir), k * std::sin(dir), rng.uniform(0.0, 2.0 * std::numbers::pi)});
    }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (const Wave& w : waves) acc += std::cos(w.kx * (x + 0.5) + w.ky * (y + 0.5) + w.phase);
        pc.gt_soft(x, y) += spec.background_amplitude * acc / kWaves;
      }
  }
  for (int v = 0; v < spec.vessel_count; ++v) {
    const Vec2 a{rng.uniform(0.1, 0.9) * W, rng.uniform(0.1, 0.9) * H};
    const double len = rng.uniform(0.15, 0.45) * std::min(W, H);
    const double dir = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec2 b{a.x + len * std::cos(dir), a.y + len * std::sin(dir)};
    const Vec2 ctrl{0.5 * (a.x + b.x) + rng.uniform(-0.25, 0.25) * len,
                    0.5 * (a.y + b.y) + rng.uniform(-0.25, 0.25) * len};
    constexpr int kSeg = 64;
    std::vector<Vec2> poly;
    for (int i = 0; i <= kSeg; ++i) {
      const double u = static_cast<double>(i) / kSeg;
      poly.push_back((1 - u) * (1 - u) * a + 2 * (1 - u) * u * ctrl + u * u * b);
    }
    const double reach = 4.0 * spec.vessel_sigma;
    double x0 = W, y0 = H, x1 = 0, y1 = 0;
    for (const Vec2& p : poly) {
      x0 = std::min(x0, p.x);
      y0 = std::min(y0, p.y);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
    const int ix0 = std::max(0, static_cast<int>(x0 - reach)), iy0 = std::max(0, static_cast<int>(y0 - reach));
    const int ix1 = std::min(W - 1, static_cast<int>(x1 + reach)), iy1 = std::min(H - 1, static_cast<int>(y1 + reach));
    for (int y = iy0; y <= iy1; ++y)
      for (int x = ix0; x <= ix1; ++x) {
        const Vec2 p{x + 0.5, y + 0.5};
        double d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < kSeg; ++i) d = std::min(d, project_to_segment(p, poly[i], poly[i + 1]).distance);
        if (d <= reach)
          pc.gt_soft(x, y) += spec.vessel_contrast * std::exp(-0.5 * d * d / (spec.vessel_sigma * spec.vessel_sigma));
      }
  }
  for (int n = 0; n < spec.nodule_count; ++n) {
    const Vec2 c{rng.uniform(0.1, 0.9) * W, rng.uniform(0.1, 0.9) * H};
    const double sigma = 0.25 * spec.nodule_diameter;
    const double reach = 4.0 * sigma;
    for (int y = std::max(0, static_cast<int>(c.y - reach)); y <= std::min(H - 1, static_cast<int>(c.y + reach)); ++y)
      for (int x = std::max(0, static_cast<int>(c.x - reach)); x <= std::min(W - 1, static_cast<int>(c.x + reach)); ++x) {
        const double dx = x + 0.5 - c.x, dy = y + 0.5 - c.y;
        pc.gt_soft(x, y) += spec.nodule_contrast * std::exp(-0.5 * (dx * dx + dy * dy) / (sigma * sigma));
      }
  }
  for (double& v : pc.gt_soft.pixels()) v = detail::dyadic(v);

  // --- masks: pixel-center rasterization of the strips.
  LabelImage labels(W, H);
  for (const RibArc& rib : pc.ribs) {
    double x0, y0, x1, y1;
    rib.contour.bounds(x0, y0, x1, y1);
    for (int y = std::max(0, static_cast<int>(y0)); y <= std::min(H - 1, static_cast<int>(y1)); ++y)
      for (int x = std::max(0, static_cast<int>(x0)); x <= std::min(W - 1, static_cast<int>(x1)); ++x) {
        if (!rib.contour.contains({x + 0.5, y + 0.5})) continue;
        if (labels(x, y) != 0)
          throw ConfigError("ribs " + std::to_string(labels(x, y)) + " and " + std::to_string(rib.label) + " overlap");
        labels(x, y) = rib.label;
      }
  }
  pc.masks = masks_from_labels(labels);

  // --- bone: profile of the exact distance to the strip outline.
  pc.gt_bone = Image(W, H, spec.max_value, 0.0);
  for (std::size_t r = 0; r < pc.ribs.size(); ++r) {
    const RibMask& m = pc.masks.masks[r];
    const double hw_r = pc.ribs[r].half_width;
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!m.bitmap(x, y)) continue;
        const double d = distance_to_contour({x + 0.5, y + 0.5}, pc.ribs[r].contour);
        pc.gt_bone(x, y) = detail::dyadic(spec.rib_amplitude * rib_profile(d / hw_r));
      }
  }
  pc.raw = Image(W, H, spec.max_value, 0.0);
  for (std::size_t i = 0; i < pc.raw.size(); ++i)
    pc.raw.pixels()[i] = pc.gt_soft.pixels()[i] + pc.gt_bone.pixels()[i];
  return pc;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = nlohmann::json{{"width", s.width},
                     {"height", s.height},
                     {"n_ribs", s.n_ribs},
                     {"max_value", s.max_value},
                     {"rib_amplitude", s.rib_amplitude},
                     {"rib_width", s.rib_width},
                     {"rib_gap", s.rib_gap},
                     {"background", s.background == BackgroundKind::constant ? "constant" : "low_frequency"},
                     {"background_level", s.background_level},
                     {"background_amplitude", s.background_amplitude},
                     {"background_wavelength", s.background_wavelength},
                     {"vessel_count", s.vessel_count},
                     {"vessel_sigma", s.vessel_sigma},
                     {"vessel_contrast", s.vessel_contrast},
                     {"nodule_count", s.nodule_count},
                     {"nodule_diameter", s.nodule_diameter},
                     {"nodule_contrast", s.nodule_contrast},
                     {"seed", s.seed}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, PhantomSpec& s) {
  if (!j.is_object()) throw ConfigError("phantom spec must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "width") s.width = v.get<int>();
    else if (k == "height") s.height = v.get<int>();
    else if (k == "n_ribs") s.n_ribs = v.get<int>();
    else if (k == "max_value") s.max_value = v.get<double>();
    else if (k == "rib_amplitude") s.rib_amplitude = v.get<double>();
    else if (k == "rib_width") s.rib_width = v.get<double>();
    else if (k == "rib_gap") s.rib_gap = v.get<double>();
    else if (k == "background") {
      const auto b = v.get<std::string>();
      if (b == "constant") s.background = BackgroundKind::constant;
      else if (b == "low_frequency") s.background = BackgroundKind::low_frequency;
      else throw ConfigError("unknown background kind: " + b);
    } else if (k == "background_level") s.background_level = v.get<double>();
    else if (k == "background_amplitude") s.background_amplitude = v.get<double>();
    else if (k == "background_wavelength") s.background_wavelength = v.get<double>();
    else if (k == "vessel_count") s.vessel_count = v.get<int>();
    else if (k == "vessel_sigma") s.vessel_sigma = v.get<double>();
    else if (k == "vessel_contrast") s.vessel_contrast = v.get<double>();
    else if (k == "nodule_count") s.nodule_count = v.get<int>();
    else if (k == "nodule_diameter") s.nodule_diameter = v.get<double>();
    else if (k == "nodule_contrast") s.nodule_contrast = v.get<double>();
    else if (k == "seed") s.seed = v.get<std::uint64_t>();
    else throw ConfigError("unknown phantom spec key: " + k);
  }
}

}  // namespace ribsupp
