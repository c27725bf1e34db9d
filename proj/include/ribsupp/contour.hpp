#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "image.hpp"

namespace ribsupp {

// Nearest point on a contour to a query point.
struct ContourHit {
  double distance = 0.0;
  double t = 0.0;          // arc position of the foot point
  std::size_t edge = 0;    // owning edge
  bool at_vertex = false;  // foot coincides with an edge endpoint
  Vec2 foot;
};

// Closed counterclockwise polygon parameterized by arc length t in [0, length).
class Contour {
 public:
  Contour() = default;

  explicit Contour(std::vector<Vec2> vertices) {
    // Drop repeated vertices (zero-length edges).
    std::vector<Vec2> clean;
    clean.reserve(vertices.size());
    for (const Vec2& v : vertices)
      if (clean.empty() || !(v == clean.back())) clean.push_back(v);
    while (clean.size() > 1 && clean.front() == clean.back()) clean.pop_back();
    if (clean.size() < 3) throw DomainError("contour needs at least 3 distinct vertices");
    if (signed_area2(clean) <= 0.0)
      throw DomainError("contour must be counterclockwise (positive shoelace area)");
    vertices_ = std::move(clean);
    build();
  }

  // Accepts either orientation and reverses clockwise input.
  static Contour counterclockwise(std::vector<Vec2> vertices) {
    if (signed_area2(vertices) < 0.0) std::reverse(vertices.begin(), vertices.end());
    return Contour(std::move(vertices));
  }

  const std::vector<Vec2>& vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }
  const std::vector<double>& edge_lengths() const noexcept { return edge_len_; }
  // cum_length()[i] is the arc position of vertex i; back() == length().
  const std::vector<double>& cum_length() const noexcept { return cum_; }
  double length() const noexcept { return cum_.back(); }
  double area() const { return signed_area(vertices_); }

  Vec2 edge_direction(std::size_t i) const { return dir_[i]; }
  Vec2 edge_normal(std::size_t i) const { return normal_[i]; }
  Vec2 vertex_normal(std::size_t i) const { return vnormal_[i]; }

  double wrap(double t) const {
    const double len = length();
    double w = std::fmod(t, len);
    if (w < 0.0) w += len;
    if (w >= len) w = 0.0;
    return w;
  }

  // Edge containing arc position t (already wrapped).
  std::size_t edge_at(double t) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(cum_.begin(), it));
    i = i == 0 ? 0 : i - 1;
    return std::min(i, vertices_.size() - 1);
  }

  Vec2 point_at(double t) const {
    t = wrap(t);
    const std::size_t i = edge_at(t);
    return vertices_[i] + (t - cum_[i]) * dir_[i];
  }

  // Inward unit normal at t; the angular bisector when t sits on a vertex.
  Vec2 normal_at(double t) const {
    t = wrap(t);
    const std::size_t i = edge_at(t);
    return t == cum_[i] ? vnormal_[i] : normal_[i];
  }

  bool contains(Vec2 p) const { return point_in_polygon(vertices_, p); }

  // Brute force over every edge; exact ties resolve toward the smaller t.
  ContourHit nearest(Vec2 p) const {
    ContourHit best;
    best.distance = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto proj = project_to_segment(p, vertices_[i], vertices_[(i + 1) % n]);
      if (proj.distance < best.distance) {
        best.distance = proj.distance;
        best.t = proj.param >= 1.0 ? (i + 1 == n ? 0.0 : cum_[i + 1])
                                   : cum_[i] + proj.param * edge_len_[i];
        best.edge = i;
        best.at_vertex = proj.param <= 0.0 || proj.param >= 1.0;
        best.foot = proj.foot;
      }
    }
    return best;
  }

  double distance(Vec2 p) const { return nearest(p).distance; }

  // Axis-aligned bounds of the vertices.
  void bounds(double& x0, double& y0, double& x1, double& y1) const {
    x0 = y0 = std::numeric_limits<double>::infinity();
    x1 = y1 = -std::numeric_limits<double>::infinity();
    for (const Vec2& v : vertices_) {
      x0 = std::min(x0, v.x);
      y0 = std::min(y0, v.y);
      x1 = std::max(x1, v.x);
      y1 = std::max(y1, v.y);
    }
  }

 private:
  void build() {
    const std::size_t n = vertices_.size();
    edge_len_.resize(n);
    dir_.resize(n);
    normal_.resize(n);
    vnormal_.resize(n);
    cum_.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 d = vertices_[(i + 1) % n] - vertices_[i];
      edge_len_[i] = norm(d);
      dir_[i] = (1.0 / edge_len_[i]) * d;
      normal_[i] = left_perp(dir_[i]);
      cum_[i + 1] = cum_[i] + edge_len_[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 b = normal_[(i + n - 1) % n] + normal_[i];
      const double len = norm(b);
      vnormal_[i] = len > 1e-12 ? (1.0 / len) * b : normal_[i];
    }
  }

  std::vector<Vec2> vertices_;
  std::vector<double> edge_len_;
  std::vector<double> cum_;
  std::vector<Vec2> dir_;
  std::vector<Vec2> normal_;
  std::vector<Vec2> vnormal_;
};

// Removes vertices whose incoming and outgoing edges point the same way.
inline std::vector<Vec2> merge_collinear(std::vector<Vec2> poly) {
  bool changed = true;
  while (changed && poly.size() > 3) {
    changed = false;
    std::vector<Vec2> out;
    out.reserve(poly.size());
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly[(i + n - 1) % n];
      const Vec2 b = poly[i];
      const Vec2 c = poly[(i + 1) % n];
      const Vec2 u = b - a;
      const Vec2 v = c - b;
      if (cross(u, v) == 0.0 && dot(u, v) > 0.0) {
        changed = true;
        continue;
      }
      out.push_back(b);
    }
    poly = std::move(out);
  }
  return poly;
}

// Outer boundary of the foreground of `mask` on the pixel-corner lattice,
// traced counterclockwise and collinear-merged. Interior holes are ignored,
// i.e. the polygon encloses the hole-filled component. At diagonal pinch
// vertices the trace stays with the current pixel (4-connectivity).
inline Contour trace_contour(const Bitmap& mask) {
  int minx = mask.width, miny = mask.height, maxx = -1, maxy = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask(x, y)) {
        minx = std::min(minx, x);
        miny = std::min(miny, y);
        maxx = std::max(maxx, x);
        maxy = std::max(maxy, y);
      }
  if (maxx < 0) throw DomainError("empty mask");
  if (maxx - minx + 1 < 2 || maxy - miny + 1 < 2)
    throw DomainError("degenerate mask component (width or height < 2 px)");

  // Directed boundary edges with the foreground on the left.
  using Key = std::pair<int, int>;  // (y, x) of the start vertex
  struct Edge {
    int x0, y0, x1, y1;
    bool used = false;
  };
  std::vector<Edge> edges;
  std::map<Key, std::vector<std::size_t>> outgoing;
  auto add = [&](int x0, int y0, int x1, int y1) {
    outgoing[{y0, x0}].push_back(edges.size());
    edges.push_back({x0, y0, x1, y1});
  };
  for (int y = miny; y <= maxy; ++y)
    for (int x = minx; x <= maxx; ++x) {
      if (!mask(x, y)) continue;
      if (!mask(x, y - 1)) add(x, y, x + 1, y);
      if (!mask(x + 1, y)) add(x + 1, y, x + 1, y + 1);
      if (!mask(x, y + 1)) add(x + 1, y + 1, x, y + 1);
      if (!mask(x - 1, y)) add(x, y + 1, x, y);
    }

  std::vector<std::vector<Vec2>> loops;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (edges[start].used) continue;
    std::vector<Vec2> loop;
    std::size_t cur = start;
    while (!edges[cur].used) {
      Edge& e = edges[cur];
      e.used = true;
      loop.push_back({static_cast<double>(e.x0), static_cast<double>(e.y0)});
      const auto& cand = outgoing[{e.y1, e.x1}];
      const int dx = e.x1 - e.x0, dy = e.y1 - e.y0;
      std::size_t next = cand.front();
      if (cand.size() > 1) {
        // Prefer the left turn: keeps hugging the same pixel.
        for (std::size_t c : cand) {
          const int ex = edges[c].x1 - edges[c].x0, ey = edges[c].y1 - edges[c].y0;
          if (dx * ey - dy * ex > 0) next = c;
        }
      }
      cur = next;
    }
    loops.push_back(std::move(loop));
  }
  std::size_t best = 0;
  double best_area = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const double a = signed_area2(loops[i]);
    if (a > best_area) {
      best_area = a;
      best = i;
    }
  }
  auto poly = merge_collinear(std::move(loops[best]));
  // Deterministic start: the vertex with the smallest (y, x).
  auto first = std::min_element(poly.begin(), poly.end(), [](Vec2 a, Vec2 b) {
    return a.y < b.y || (a.y == b.y && a.x < b.x);
  });
  std::rotate(poly.begin(), first, poly.end());
  return Contour(std::move(poly));
}

// Turns a lattice staircase into a smooth polygon. The contour is resampled at
// 1 px arc spacing, split at corners (turning angle over +-corner_probe px above
// corner_deg), and every sample is replaced by a Gaussian-weighted local
// quadratic fit (bandwidth sigma) over its own piece. Corners stay sharp and
// straight or gently curved runs lose the half-pixel stair pattern.
// sigma <= 0 returns the input.
struct ContourFit {
  double sigma = 16.0;
  double corner_deg = 45.0;
  double corner_probe = 4.0;
};

namespace detail {

inline Vec2 local_quadratic(const std::vector<Vec2>& pts, long long i, long long lo, long long hi, double sig) {
  const long long n = static_cast<long long>(pts.size());
  const long long reach = static_cast<long long>(std::ceil(3.0 * sig));
  double m[5] = {0, 0, 0, 0, 0}, bx[3] = {0, 0, 0}, by[3] = {0, 0, 0};
  for (long long j = std::max(lo, i - reach); j <= std::min(hi, i + reach); ++j) {
    const double u = static_cast<double>(j - i);
    const double w = std::exp(-0.5 * u * u / (sig * sig));
    const Vec2 p = pts[static_cast<std::size_t>(((j % n) + n) % n)];
    double pw = w;
    for (double& v : m) {
      v += pw;
      pw *= u;
    }
    bx[0] += w * p.x, bx[1] += w * u * p.x, bx[2] += w * u * u * p.x;
    by[0] += w * p.y, by[1] += w * u * p.y, by[2] += w * u * u * p.y;
  }
  const auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h, double k) {
    return a * (e * k - f * h) - b * (d * k - f * g) + c * (d * h - e * g);
  };
  const double D = det3(m[0], m[1], m[2], m[1], m[2], m[3], m[2], m[3], m[4]);
  if (std::abs(D) < 1e-12 * m[0] * m[0] * m[0]) {
    // too few samples for a quadratic: weighted mean
    return {bx[0] / m[0], by[0] / m[0]};
  }
  return {det3(bx[0], m[1], m[2], bx[1], m[2], m[3], bx[2], m[3], m[4]) / D,
          det3(by[0], m[1], m[2], by[1], m[2], m[3], by[2], m[3], m[4]) / D};
}

}  // namespace detail

// Sample indices (on the 1 px resampling of c) that are corners.
inline std::vector<std::size_t> contour_corners(const std::vector<Vec2>& pts, double step, const ContourFit& fit) {
  const long long n = static_cast<long long>(pts.size());
  const auto at = [&](long long j) { return pts[static_cast<std::size_t>(((j % n) + n) % n)]; };
  const long long k = std::max(1LL, std::llround(fit.corner_probe / step));
  std::vector<double> turn(pts.size());
  for (long long i = 0; i < n; ++i) {
    const Vec2 a = at(i) - at(i - k), b = at(i + k) - at(i);
    turn[static_cast<std::size_t>(i)] = std::abs(std::atan2(cross(a, b), dot(a, b)));
  }
  const double threshold = fit.corner_deg * std::numbers::pi / 180.0;
  std::vector<std::size_t> out;
  for (long long i = 0; i < n; ++i) {
    const double ti = turn[static_cast<std::size_t>(i)];
    if (ti < threshold) continue;
    bool peak = true;
    for (long long d = -k; d <= k && peak; ++d) {
      const long long j = ((i + d) % n + n) % n;
      const double tj = turn[static_cast<std::size_t>(j)];
      if (d != 0 && (tj > ti || (tj == ti && j < i))) peak = false;
    }
    if (peak) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

inline Contour regularize_contour(const Contour& c, const ContourFit& fit = {}) {
  if (fit.sigma <= 0.0) return c;
  const double len = c.length();
  const std::size_t n = std::max<std::size_t>(8, static_cast<std::size_t>(std::lround(len)));
  const double step = len / static_cast<double>(n);
  std::vector<Vec2> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = c.point_at((static_cast<double>(i) + 0.5) * step);

  // a window wider than a quarter of the loop would fold back on itself
  const double sig = std::min(fit.sigma / step, static_cast<double>(n) / 12.0);
  const long long nn = static_cast<long long>(n);
  const auto corners = contour_corners(pts, step, fit);
  std::vector<Vec2> out(n);
  if (corners.empty()) {
    const long long reach = static_cast<long long>(std::ceil(3.0 * sig));
    for (long long i = 0; i < nn; ++i)
      out[static_cast<std::size_t>(i)] = detail::local_quadratic(pts, i, i - reach, i + reach, sig);
  } else {
    for (std::size_t q = 0; q < corners.size(); ++q) {
      const long long a = static_cast<long long>(corners[q]);
      long long b = static_cast<long long>(corners[(q + 1) % corners.size()]);
      if (b <= a) b += nn;
      for (long long i = a; i < b; ++i) out[static_cast<std::size_t>(i % nn)] = detail::local_quadratic(pts, i, a, b, sig);
    }
  }
  return Contour::counterclockwise(std::move(out));
}

}  // namespace ribsupp
