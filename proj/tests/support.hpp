#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <ribsupp.hpp>

namespace testing_support {

using namespace ribsupp;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("ribsupp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline Contour square(double x0, double y0, double side) {
  // counterclockwise in the (x right, y down) frame: positive shoelace area
  return Contour({{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}});
}

inline Contour rectangle(double x0, double y0, double w, double h) {
  return Contour({{x0, y0}, {x0 + w, y0}, {x0 + w, y0 + h}, {x0, y0 + h}});
}

inline Contour regular_polygon(Vec2 c, double r, int n) {
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    v.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return Contour::counterclockwise(std::move(v));
}

inline STField random_field(const std::shared_ptr<const STLayout>& layout, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  STField f(layout);
  for (std::size_t j = 0; j < f.columns(); ++j)
    for (std::size_t k = 0; k < f.valid_rows(j); ++k) f.at(j, k) = u(rng);
  return f;
}

// Hand-built layout with explicit depths; positions are irrelevant for the
// pure ST-space stages.
inline std::shared_ptr<const STLayout> synthetic_layout(std::vector<double> depth, double ds = 1.0) {
  auto L = std::make_shared<STLayout>();
  L->contour = square(0, 0, static_cast<double>(depth.size()) / 4.0);
  L->columns = depth.size();
  L->dt = L->contour.length() / static_cast<double>(depth.size());
  L->ds = ds;
  L->depth = std::move(depth);
  std::size_t rows = 1;
  for (std::size_t j = 0; j < L->columns; ++j) rows = std::max(rows, L->valid_rows(j));
  L->rows = rows;
  L->position.assign(L->columns * L->rows, Vec2{});
  return L;
}

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Dense MS-SSIM written directly from the definition: full 2-D window sums
// at every valid position, no separability, no shared helpers.
inline double dense_ms_ssim(const Image& x, const Image& y, double S) {
  const double sig[5] = {0.5, 1.0, 2.0, 4.0, 8.0};
  const double c1 = (0.01 * S) * (0.01 * S), c2 = (0.03 * S) * (0.03 * S);
  int w = x.width(), h = x.height();
  std::vector<double> a(x.data()), b(y.data());
  double product = 1.0, lum = 1.0;
  for (int j = 0; j < 5; ++j) {
    if (j > 0) {
      const int nw = w / 2, nh = h / 2;
      std::vector<double> a2(static_cast<std::size_t>(nw) * nh), b2(a2.size());
      for (int yy = 0; yy < nh; ++yy)
        for (int xx = 0; xx < nw; ++xx) {
          auto at = [&](const std::vector<double>& v, int px, int py) { return v[static_cast<std::size_t>(py) * w + px]; };
          a2[static_cast<std::size_t>(yy) * nw + xx] =
              (at(a, 2 * xx, 2 * yy) + at(a, 2 * xx + 1, 2 * yy) + at(a, 2 * xx, 2 * yy + 1) + at(a, 2 * xx + 1, 2 * yy + 1)) / 4.0;
          b2[static_cast<std::size_t>(yy) * nw + xx] =
              (at(b, 2 * xx, 2 * yy) + at(b, 2 * xx + 1, 2 * yy) + at(b, 2 * xx, 2 * yy + 1) + at(b, 2 * xx + 1, 2 * yy + 1)) / 4.0;
        }
      a.swap(a2);
      b.swap(b2);
      w = nw;
      h = nh;
    }
    double win[11][11], total = 0.0;
    for (int u = 0; u < 11; ++u)
      for (int v = 0; v < 11; ++v)
        total += win[u][v] = std::exp(-((u - 5) * (u - 5) + (v - 5) * (v - 5)) / (2.0 * sig[j] * sig[j]));
    double cs_sum = 0.0, l_sum = 0.0;
    int count = 0;
    for (int py = 0; py + 11 <= h; ++py)
      for (int px = 0; px + 11 <= w; ++px) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int u = 0; u < 11; ++u)
          for (int v = 0; v < 11; ++v) {
            const double wt = win[u][v] / total;
            const double va = a[static_cast<std::size_t>(py + u) * w + px + v];
            const double vb = b[static_cast<std::size_t>(py + u) * w + px + v];
            ma += wt * va;
            mb += wt * vb;
            saa += wt * va * va;
            sbb += wt * vb * vb;
            sab += wt * va * vb;
          }
        const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
        cs_sum += (2 * cov + c2) / (var_a + var_b + c2);
        l_sum += (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ++count;
      }
    product *= cs_sum / count;
    if (j == 4) lum = l_sum / count;
  }
  return lum * product;
}

}  // namespace testing_support
