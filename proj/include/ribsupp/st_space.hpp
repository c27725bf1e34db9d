#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "atomic_file.hpp"
#include "contour.hpp"
#include "error.hpp"
#include "image.hpp"
#include "parallel.hpp"

namespace ribsupp {

// Position in the contour-normal coordinate system: t is arc length along
// the contour, s the depth along the inward normal.
struct STCoord {
  double s = 0.0;
  double t = 0.0;
};

// Point reached by walking s along the inward normal from the contour point at t.
inline Vec2 inverse_st(const Contour& c, double s, double t) {
  return c.point_at(t) + s * c.normal_at(t);
}

// s is the distance to the nearest contour point, t that point's arc position.
inline STCoord forward_st(const Contour& c, Vec2 p) {
  const ContourHit hit = c.nearest(p);
  if (!(hit.distance > 0.0) || !c.contains(p))
    throw DomainError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") is not strictly inside the contour");
  return {hit.distance, hit.t};
}

// How far a normal ray may go before another part of the contour is closer
// than the ray's own foot point. The slack absorbs polygonization: near a
// vertex of a polygon approximating a smooth curve, the neighbouring edge is
// marginally closer than s.
struct DepthTolerance {
  double relative = 0.02;
  double absolute = 0.05;
};

// Sampling lattice of the ST-space of one contour.
struct STLayout {
  Contour contour;
  std::size_t columns = 0;  // T
  std::size_t rows = 0;     // S
  double dt = 1.0;          // effective spacing: contour.length() / T
  double ds = 1.0;
  std::vector<double> depth;   // c(t) per column, pixel units
  std::vector<Vec2> position;  // column-major [t * rows + s]; only valid cells meaningful

  std::size_t cell(std::size_t t, std::size_t s) const { return t * rows + s; }
  // Number of valid s-samples in column t.
  std::size_t valid_rows(std::size_t t) const {
    return static_cast<std::size_t>(std::floor(depth[t] / ds + 1e-9)) + 1;
  }
  bool valid(std::size_t t, std::size_t s) const { return s < valid_rows(t); }
  double t_at(std::size_t j) const { return static_cast<double>(j) * dt; }
};

inline std::size_t column_count(const Contour& c, double dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c.length() / dt)));
}

// Depth of one column: largest multiple of ds such that every probe up to it
// stays inside and keeps its own foot point as (near-)nearest contour point.
inline double column_depth(const Contour& c, double t, double ds, DepthTolerance tol = {}) {
  const Vec2 base = c.point_at(t);
  const Vec2 n = c.normal_at(t);
  double x0, y0, x1, y1;
  c.bounds(x0, y0, x1, y1);
  const double limit = std::hypot(x1 - x0, y1 - y0);
  double depth = 0.0;
  for (int k = 1;; ++k) {
    const double s = k * ds;
    if (s > limit) break;
    const Vec2 q = base + s * n;
    if (!c.contains(q)) break;
    if (c.distance(q) < s * (1.0 - tol.relative) - tol.absolute) break;
    depth = s;
  }
  return depth;
}

// c(t) sampled at T = round(length / dt) evenly spaced columns.
inline std::vector<double> compute_depth(const Contour& c, double dt, double ds = 1.0,
                                         int threads = 1, DepthTolerance tol = {}) {
  if (!(ds > 0.0)) throw DomainError("ds must be positive");
  const std::size_t T = column_count(c, dt);
  const double step = c.length() / static_cast<double>(T);
  std::vector<double> depth(T);
  parallel_for(T, threads, [&](std::size_t j) { depth[j] = column_depth(c, j * step, ds, tol); });
  return depth;
}

inline STLayout make_layout(const Contour& c, double dt, double ds, int threads = 1,
                            DepthTolerance tol = {}) {
  STLayout L;
  L.contour = c;
  L.columns = column_count(c, dt);
  L.dt = c.length() / static_cast<double>(L.columns);
  L.ds = ds;
  L.depth = compute_depth(c, dt, ds, threads, tol);
  std::size_t rows = 1;
  for (std::size_t j = 0; j < L.columns; ++j) rows = std::max(rows, L.valid_rows(j));
  L.rows = rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  L.position.assign(L.columns * L.rows, Vec2{nan, nan});
  for (std::size_t j = 0; j < L.columns; ++j) {
    const Vec2 base = c.point_at(L.t_at(j));
    const Vec2 n = c.normal_at(L.t_at(j));
    for (std::size_t k = 0; k < L.valid_rows(j); ++k) L.position[L.cell(j, k)] = base + (k * ds) * n;
  }
  return L;
}

// T x S grid of samples over one contour's ST-space. Invalid cells (beyond the
// column depth) hold NaN and are skipped by every stage.
class STField {
 public:
  STField() = default;
  explicit STField(std::shared_ptr<const STLayout> layout, double fill = 0.0)
      : layout_(std::move(layout)),
        values_(layout_->columns * layout_->rows, std::numeric_limits<double>::quiet_NaN()) {
    for (std::size_t j = 0; j < columns(); ++j)
      for (std::size_t k = 0; k < layout_->valid_rows(j); ++k) at(j, k) = fill;
  }

  const STLayout& layout() const { return *layout_; }
  const std::shared_ptr<const STLayout>& layout_ptr() const { return layout_; }
  std::size_t columns() const { return layout_->columns; }
  std::size_t rows() const { return layout_->rows; }
  double dt() const { return layout_->dt; }
  double ds() const { return layout_->ds; }
  double depth(std::size_t t) const { return layout_->depth[t]; }
  std::size_t valid_rows(std::size_t t) const { return layout_->valid_rows(t); }
  bool valid(std::size_t t, std::size_t s) const { return layout_->valid(t, s); }

  double& at(std::size_t t, std::size_t s) { return values_[t * rows() + s]; }
  double at(std::size_t t, std::size_t s) const { return values_[t * rows() + s]; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  static bool is_sentinel(double v) { return std::isnan(v); }

 private:
  std::shared_ptr<const STLayout> layout_;
  std::vector<double> values_;
};

inline void check_within(const Contour& c, const Image& img) {
  double x0, y0, x1, y1;
  c.bounds(x0, y0, x1, y1);
  if (x0 < 0.0 || y0 < 0.0 || x1 > img.width() || y1 > img.height())
    throw DomainError("contour exceeds image bounds " + img.shape_string());
}

// Bilinear samples of img at every valid cell of the layout.
inline STField sample_field(const Image& img, std::shared_ptr<const STLayout> layout,
                            int threads = 1) {
  check_within(layout->contour, img);
  STField f(std::move(layout));
  const STLayout& L = f.layout();
  parallel_for(L.columns, threads, [&](std::size_t j) {
    for (std::size_t k = 0; k < L.valid_rows(j); ++k) {
      const Vec2 p = L.position[L.cell(j, k)];
      f.at(j, k) = img.bilinear(p.x, p.y);
    }
  });
  return f;
}

inline STField sample_field(const Image& img, const Contour& c, double dt = 1.0, double ds = 1.0,
                            int threads = 1) {
  check_within(c, img);
  return sample_field(img, std::make_shared<const STLayout>(make_layout(c, dt, ds, threads)), threads);
}

// Accumulated back-projection; weight zero means "not covered".
struct BackProjection {
  Image values;
  std::vector<double> weights;
};

// Splats each valid cell onto its four surrounding pixel centers with bilinear
// weights, then normalizes by the accumulated weight. Cells are visited in
// fixed (t, s) order so the floating-point sums do not depend on threading.
inline BackProjection backproject(const STField& f, int width, int height, double max_value = 0.0) {
  BackProjection out{Image(width, height, max_value, 0.0),
                     std::vector<double>(static_cast<std::size_t>(width) * height, 0.0)};
  std::vector<double> acc(out.weights.size(), 0.0);
  const STLayout& L = f.layout();
  for (std::size_t j = 0; j < L.columns; ++j)
    for (std::size_t k = 0; k < L.valid_rows(j); ++k) {
      const double v = f.at(j, k);
      if (STField::is_sentinel(v)) continue;
      const Vec2 p = L.position[L.cell(j, k)];
      const double u = p.x - 0.5, w = p.y - 0.5;
      const int x0 = static_cast<int>(std::floor(u));
      const int y0 = static_cast<int>(std::floor(w));
      const double fx = u - x0, fy = w - y0;
      const double wt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      for (int q = 0; q < 4; ++q) {
        if (wt[q] <= 0.0 || xs[q] < 0 || ys[q] < 0 || xs[q] >= width || ys[q] >= height) continue;
        const std::size_t i = static_cast<std::size_t>(ys[q]) * width + xs[q];
        acc[i] += wt[q] * v;
        out.weights[i] += wt[q];
      }
    }
  auto px = out.values.pixels();
  for (std::size_t i = 0; i < acc.size(); ++i)
    if (out.weights[i] > 0.0) px[i] = acc[i] / out.weights[i];
  return out;
}

// Interpolates the field at an arbitrary (s, t): linear in s within each of the
// two neighbouring columns (s clamped to that column's depth), then linear in t
// with cyclic wrap.
inline double interpolate_field(const STField& f, STCoord st) {
  const STLayout& L = f.layout();
  const double ti = L.contour.wrap(st.t) / L.dt;
  const auto j0 = static_cast<std::size_t>(std::floor(ti)) % L.columns;
  const std::size_t j1 = (j0 + 1) % L.columns;
  const double ft = ti - std::floor(ti);
  auto column_value = [&](std::size_t j) {
    const double smax = static_cast<double>(L.valid_rows(j) - 1);
    const double si = std::clamp(st.s / L.ds, 0.0, smax);
    const auto k0 = static_cast<std::size_t>(std::floor(si));
    const double fs = si - static_cast<double>(k0);
    const double a = f.at(j, k0);
    return fs > 0.0 ? a * (1.0 - fs) + f.at(j, k0 + 1) * fs : a;
  };
  const double v0 = column_value(j0);
  return ft > 0.0 ? v0 * (1.0 - ft) + column_value(j1) * ft : v0;
}

// ---------------------------------------------------------------------------
// Debug dump: little-endian binary
//   u64 T, u64 S, f64 dt, f64 ds, f64 depth[T], f64 values[T][S] (t-major)
// Invalid cells are written as NaN.

inline void write_field_dump(const STField& f, const std::filesystem::path& path) {
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("unwritable path: " + path.string());
    const std::uint64_t T = f.columns(), S = f.rows();
    const double dt = f.dt(), ds = f.ds();
    os.write(reinterpret_cast<const char*>(&T), sizeof T);
    os.write(reinterpret_cast<const char*>(&S), sizeof S);
    os.write(reinterpret_cast<const char*>(&dt), sizeof dt);
    os.write(reinterpret_cast<const char*>(&ds), sizeof ds);
    os.write(reinterpret_cast<const char*>(f.layout().depth.data()),
             static_cast<std::streamsize>(T * sizeof(double)));
    os.write(reinterpret_cast<const char*>(f.values().data()),
             static_cast<std::streamsize>(T * S * sizeof(double)));
    if (!os) throw IoError("write failed: " + path.string());
  });
}

struct FieldDump {
  std::uint64_t columns = 0;
  std::uint64_t rows = 0;
  double dt = 0.0;
  double ds = 0.0;
  std::vector<double> depth;
  std::vector<double> values;
};

inline FieldDump read_field_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  FieldDump d;
  is.read(reinterpret_cast<char*>(&d.columns), sizeof d.columns);
  is.read(reinterpret_cast<char*>(&d.rows), sizeof d.rows);
  is.read(reinterpret_cast<char*>(&d.dt), sizeof d.dt);
  is.read(reinterpret_cast<char*>(&d.ds), sizeof d.ds);
  if (!is || d.columns > (1u << 24) || d.rows > (1u << 24)) throw FormatError("bad field dump header");
  d.depth.resize(d.columns);
  d.values.resize(d.columns * d.rows);
  is.read(reinterpret_cast<char*>(d.depth.data()), static_cast<std::streamsize>(d.columns * sizeof(double)));
  is.read(reinterpret_cast<char*>(d.values.data()),
          static_cast<std::streamsize>(d.values.size() * sizeof(double)));
  if (!is) throw FormatError("truncated field dump: " + path.string());
  return d;
}

}  // namespace ribsupp
