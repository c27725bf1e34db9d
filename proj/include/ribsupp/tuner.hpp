#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "image.hpp"
#include "mask.hpp"
#include "metrics.hpp"
#include "parallel.hpp"
#include "suppression.hpp"

namespace ribsupp {

// Finite Cartesian grid over SuppressionParams.
struct ParamSpace {
  std::vector<double> kappa_t{3.75, 7.5, 15.0, 30.0, 60.0};
  std::vector<double> tau{0.25, 0.5, 0.75, 1.0};
  std::vector<int> k_center{1, 3, 5, 8};
  std::vector<double> s_b{0.0, 1.5, 3.0, 5.0};
  std::vector<int> k_border{1, 5, 9, 13};

  std::uint64_t size() const {
    return static_cast<std::uint64_t>(kappa_t.size()) * tau.size() * k_center.size() * s_b.size() *
           k_border.size();
  }

  void validate() const {
    if (kappa_t.empty() || tau.empty() || k_center.empty() || s_b.empty() || k_border.empty())
      throw ConfigError("every parameter grid must be non-empty");
    for (double v : kappa_t)
      if (!(v > 0.0)) throw ConfigError("kappa_t grid values must be > 0");
    for (double v : tau)
      if (!(v > 0.0)) throw ConfigError("tau grid values must be > 0");
    for (int v : k_center)
      if (v < 1) throw ConfigError("k_center grid values must be >= 1");
    for (double v : s_b)
      if (!(v >= 0.0)) throw ConfigError("s_b grid values must be >= 0");
    for (int v : k_border)
      if (v < 1) throw ConfigError("k_border grid values must be >= 1");
  }

  // Mixed-radix decoding, k_border varying fastest.
  SuppressionParams at(std::uint64_t index) const {
    SuppressionParams p;
    p.k_border = k_border[index % k_border.size()];
    index /= k_border.size();
    p.s_b = s_b[index % s_b.size()];
    index /= s_b.size();
    p.k_center = k_center[index % k_center.size()];
    index /= k_center.size();
    p.tau = tau[index % tau.size()];
    index /= tau.size();
    p.kappa_t = kappa_t[index % kappa_t.size()];
    return p;
  }
};

struct TuneEntry {
  SuppressionParams params;
  double objective = 0.0;
  double wall_time_s = 0.0;
  std::string error;  // non-empty when evaluation threw
};

struct TuneTrace {
  std::vector<TuneEntry> entries;  // entry 0 is the default parameter set
  std::size_t best = 0;
  std::uint64_t seed = 0;
};

using Objective = std::function<double(const Image& soft, const RibMaskSet& masks)>;

// Draws indices uniformly without replacement from [0, n); the i-th draw only
// depends on the seed and the draws before it.
class GridSampler {
 public:
  GridSampler(std::uint64_t n, std::uint64_t seed) : n_(n), engine_(seed) {}

  bool exhausted() const { return drawn_ == n_; }

  std::uint64_t next() {
    if (exhausted()) throw DomainError("grid exhausted");
    const std::uint64_t j = drawn_ + below(n_ - drawn_);
    const std::uint64_t pick = get(j);
    swapped_[j] = get(drawn_);
    ++drawn_;
    return pick;
  }

 private:
  std::uint64_t get(std::uint64_t i) const {
    auto it = swapped_.find(i);
    return it == swapped_.end() ? i : it->second;
  }
  // Unbiased draw in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = engine_();
    while (r >= limit);
    return r % bound;
  }

  std::uint64_t n_;
  std::uint64_t drawn_ = 0;
  std::mt19937_64 engine_;
  std::unordered_map<std::uint64_t, std::uint64_t> swapped_;
};

struct TuneOptions {
  SuppressionParams defaults{};
  SuppressionOptions suppression{};
  int threads = 1;  // candidate-level parallelism
};

// Evaluates the defaults plus `budget` distinct grid points drawn with `seed`
// (fewer when the grid is smaller) and returns the argmin. A grid point equal
// to the defaults reuses the defaults' objective.
inline std::pair<SuppressionParams, TuneTrace> random_grid_search(
    const Image& img, const RibMaskSet& masks, const ParamSpace& space, std::size_t budget,
    const Objective& objective, std::uint64_t seed, const TuneOptions& opt = {}) {
  if (budget < 1) throw ConfigError("budget must be >= 1");
  space.validate();
  opt.defaults.validate();
  check_shapes(img, masks);

  std::vector<SuppressionParams> candidates{opt.defaults};
  GridSampler sampler(space.size(), seed);
  while (candidates.size() < budget + 1 && !sampler.exhausted()) candidates.push_back(space.at(sampler.next()));

  SuppressionOptions inner = opt.suppression;
  inner.threads = opt.threads > 1 ? 1 : inner.threads;
  const auto geometry = prepare_ribs(masks, opt.suppression);

  TuneTrace trace;
  trace.seed = seed;
  trace.entries.resize(candidates.size());
  auto evaluate_one = [&](std::size_t i) {
    TuneEntry& e = trace.entries[i];
    e.params = candidates[i];
    if (i > 0 && candidates[i] == candidates[0]) return;  // filled from entry 0 below
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto res = suppress_all(img, geometry, std::vector<SuppressionParams>(masks.size(), e.params), inner);
      e.objective = objective(res.soft, masks);
    } catch (const std::exception& ex) {
      e.objective = std::numeric_limits<double>::quiet_NaN();
      e.error = ex.what();
    }
    e.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  parallel_for(candidates.size(), std::max(1, opt.threads), evaluate_one);
  for (std::size_t i = 1; i < candidates.size(); ++i)
    if (candidates[i] == candidates[0]) {
      trace.entries[i].objective = trace.entries[0].objective;
      trace.entries[i].error = trace.entries[0].error;
    }

  bool found = false;
  std::string failures;
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const TuneEntry& e = trace.entries[i];
    if (!std::isfinite(e.objective)) {
      failures += "[" + std::to_string(i) + "] " + (e.error.empty() ? "non-finite objective" : e.error) + "; ";
      continue;
    }
    if (!found || e.objective < trace.entries[trace.best].objective) {
      trace.best = i;
      found = true;
    }
  }
  if (!found) throw DomainError("objective non-finite for every candidate: " + failures);
  return {trace.entries[trace.best].params, std::move(trace)};
}

// ---------------------------------------------------------------------------
// Objectives

// Residual edge energy near rib borders plus a total-variation term inside
// the ribs; lower is better. Band and union are cached per mask set.
class UnsupervisedObjective {
 public:
  static constexpr double kBand = 2.0;
  static constexpr double kTvWeight = 0.1;

  explicit UnsupervisedObjective(const RibMaskSet& masks) {
    const int W = masks.width(), H = masks.height();
    std::vector<unsigned char> in_band(static_cast<std::size_t>(W) * H, 0);
    for (const auto& m : masks.masks) {
      double x0, y0, x1, y1;
      m.contour.bounds(x0, y0, x1, y1);
      for (int y = std::max(0, static_cast<int>(y0 - kBand - 1)); y <= std::min(H - 1, static_cast<int>(y1 + kBand)); ++y)
        for (int x = std::max(0, static_cast<int>(x0 - kBand - 1)); x <= std::min(W - 1, static_cast<int>(x1 + kBand)); ++x)
          if (m.contour.distance({x + 0.5, y + 0.5}) <= kBand) in_band[static_cast<std::size_t>(y) * W + x] = 1;
    }
    for (std::size_t i = 0; i < in_band.size(); ++i)
      if (in_band[i]) band_.push_back(i);
    const Bitmap u = masks.union_bitmap(W, H);
    for (std::size_t i = 0; i < u.bits.size(); ++i)
      if (u.bits[i]) inside_.push_back(i);
  }

  double operator()(const Image& soft, const RibMaskSet& = {}) const {
    return mean_gradient(soft, band_) + kTvWeight * mean_gradient(soft, inside_);
  }

 private:
  // Central differences, clamped at the image border.
  static double gradient(const Image& img, std::size_t i) {
    const int W = img.width(), H = img.height();
    const int x = static_cast<int>(i % W), y = static_cast<int>(i / W);
    const int xm = std::max(0, x - 1), xp = std::min(W - 1, x + 1);
    const int ym = std::max(0, y - 1), yp = std::min(H - 1, y + 1);
    const double gx = (img(xp, y) - img(xm, y)) / std::max(1, xp - xm);
    const double gy = (img(x, yp) - img(x, ym)) / std::max(1, yp - ym);
    return std::hypot(gx, gy);
  }
  static double mean_gradient(const Image& img, const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i : idx) acc += gradient(img, i);
    return acc / static_cast<double>(idx.size());
  }

  std::vector<std::size_t> band_;
  std::vector<std::size_t> inside_;
};

inline double unsupervised_objective(const Image& soft, const RibMaskSet& masks) {
  if (!masks.empty() && (masks.width() != soft.width() || masks.height() != soft.height()))
    throw ShapeError("mask shape differs from image shape " + soft.shape_string());
  return UnsupervisedObjective(masks)(soft, masks);
}

// RMSE against a known soft-tissue image (phantoms).
inline Objective supervised_objective(Image gt_soft) {
  return [gt = std::move(gt_soft)](const Image& soft, const RibMaskSet&) { return rmse(soft, gt); };
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(nlohmann::json& j, const SuppressionParams& p) {
  j = nlohmann::json{{"kappa_t", p.kappa_t}, {"tau", p.tau}, {"k_center", p.k_center},
                     {"s_b", p.s_b}, {"k_border", p.k_border}};
}

inline void from_json(const nlohmann::json& j, SuppressionParams& p) {
  if (!j.is_object()) throw ConfigError("params must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "kappa_t") p.kappa_t = it->get<double>();
    else if (k == "tau") p.tau = it->get<double>();
    else if (k == "k_center") p.k_center = it->get<int>();
    else if (k == "s_b") p.s_b = it->get<double>();
    else if (k == "k_border") p.k_border = it->get<int>();
    else throw ConfigError("unknown parameter: " + k);
  }
}

inline void to_json(nlohmann::json& j, const ParamSpace& s) {
  j = nlohmann::json{{"kappa_t", s.kappa_t}, {"tau", s.tau}, {"k_center", s.k_center},
                     {"s_b", s.s_b}, {"k_border", s.k_border}};
}

inline void from_json(const nlohmann::json& j, ParamSpace& s) {
  if (!j.is_object()) throw ConfigError("param space must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "kappa_t") s.kappa_t = it->get<std::vector<double>>();
    else if (k == "tau") s.tau = it->get<std::vector<double>>();
    else if (k == "k_center") s.k_center = it->get<std::vector<int>>();
    else if (k == "s_b") s.s_b = it->get<std::vector<double>>();
    else if (k == "k_border") s.k_border = it->get<std::vector<int>>();
    else throw ConfigError("unknown grid: " + k);
  }
}

// One JSON object per line, in draw order.
inline std::string trace_to_jsonl(const TuneTrace& trace, bool include_timing) {
  std::string out;
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const TuneEntry& e = trace.entries[i];
    nlohmann::json j{{"index", i}, {"params", e.params}, {"best", i == trace.best}, {"seed", trace.seed}};
    if (std::isfinite(e.objective)) j["objective"] = e.objective;
    else j["objective"] = nullptr;
    if (!e.error.empty()) j["error"] = e.error;
    if (include_timing) j["wall_time_s"] = e.wall_time_s;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ribsupp
