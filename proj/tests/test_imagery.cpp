#include <gtest/gtest.h>
#include <png.h>

#include <cstdio>
#include <fstream>

#include "support.hpp"

using namespace ribsupp;
using testing_support::TempDir;

namespace {

// Minimal independent libpng writer so load_image is not only tested against save_image.
void write_png(const std::filesystem::path& p, int w, int h, int depth, int color,
               const std::vector<std::uint16_t>& samples, int channels = 1) {
  std::FILE* fp = std::fopen(p.string().c_str(), "wb");
  ASSERT_NE(fp, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    FAIL() << "libpng write failed";
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    std::vector<png_color> pal(256);
    for (int i = 0; i < 256; ++i) pal[i] = {png_byte(i), png_byte(i), png_byte(i)};
    png_set_PLTE(png, info, pal.data(), 256);
  }
  png_write_info(png, info);
  const int bits_per_row = w * channels * depth;
  std::vector<png_byte> row((bits_per_row + 7) / 8);
  for (int y = 0; y < h; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int i = 0; i < w * channels; ++i) {
      const std::uint16_t v = samples[static_cast<std::size_t>(y) * w * channels + i];
      if (depth == 16) {
        row[2 * i] = png_byte(v >> 8);
        row[2 * i + 1] = png_byte(v & 0xff);
      } else if (depth == 8) {
        row[i] = png_byte(v);
      } else {
        const int per = 8 / depth;
        row[i / per] |= png_byte(v << (8 - depth * (i % per + 1)));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() + ": " + e.what();
  }
  return "";
}

Bitmap blank(int w, int h) { return Bitmap(w, h); }

}  // namespace

TEST(LoadImage, TwoByTwoSixteenBit) {
  TempDir d("img");
  write_png(d / "a.png", 2, 2, 16, PNG_COLOR_TYPE_GRAY, {0, 65535, 100, 200});
  const Image img = load_image(d / "a.png");
  EXPECT_EQ(img.width(), 2);
  EXPECT_EQ(img.height(), 2);
  EXPECT_EQ(img.max_value(), 65535.0);
  EXPECT_EQ(img.data(), (std::vector<double>{0, 65535, 100, 200}));
}

TEST(LoadImage, EightBitZeros) {
  TempDir d("img");
  write_png(d / "z.png", 16, 16, 8, PNG_COLOR_TYPE_GRAY, std::vector<std::uint16_t>(256, 0));
  const Image img = load_image(d / "z.png");
  EXPECT_EQ(img.size(), 256u);
  EXPECT_EQ(img.max_value(), 255.0);
  for (double v : img.data()) EXPECT_EQ(v, 0.0);
}

TEST(LoadImage, ErrorsAreDistinct) {
  TempDir d("img");
  write_png(d / "rgb.png", 2, 2, 8, PNG_COLOR_TYPE_RGB, std::vector<std::uint16_t>(12, 7), 3);
  write_png(d / "ga.png", 2, 2, 8, PNG_COLOR_TYPE_GRAY_ALPHA, std::vector<std::uint16_t>(8, 7), 2);
  write_png(d / "g4.png", 4, 2, 4, PNG_COLOR_TYPE_GRAY, std::vector<std::uint16_t>(8, 3));
  {
    std::ofstream os(d / "junk.png");
    os << "not a png at all";
  }
  const std::string missing = error_of([&] { load_image(d / "nope.png"); });
  const std::string rgb = error_of([&] { load_image(d / "rgb.png"); });
  const std::string ga = error_of([&] { load_image(d / "ga.png"); });
  const std::string g4 = error_of([&] { load_image(d / "g4.png"); });
  const std::string junk = error_of([&] { load_image(d / "junk.png"); });
  EXPECT_EQ(missing.rfind("io:", 0), 0u) << missing;
  EXPECT_NE(missing.find("missing file"), std::string::npos);
  EXPECT_NE(rgb.find("multi-channel"), std::string::npos) << rgb;
  EXPECT_NE(ga.find("multi-channel"), std::string::npos) << ga;
  EXPECT_NE(g4.find("bit depth"), std::string::npos) << g4;
  EXPECT_EQ(junk.rfind("format:", 0), 0u) << junk;
  EXPECT_NE(rgb, g4);
  EXPECT_NE(missing, rgb);
}

TEST(SaveImage, ClampAndRounding) {
  TempDir d("img");
  Image a(3, 1, 255, std::vector<double>{-3.0, 254.5, 253.5});
  save_image(a, d / "a.png", 8);
  EXPECT_EQ(load_image(d / "a.png").data(), (std::vector<double>{0, 254, 254}));
  Image b(2, 1, 65535, std::vector<double>{70000.0, std::numeric_limits<double>::quiet_NaN()});
  save_image(b, d / "b.png", 16);
  EXPECT_EQ(load_image(d / "b.png").data(), (std::vector<double>{65535, 0}));
  EXPECT_THROW(save_image(a, d / "c.png", 12), FormatError);
}

TEST(SaveImage, MissingDirectoryIsIoError) {
  TempDir d("img");
  Image a(2, 2, 255, 1.0);
  EXPECT_THROW(save_image(a, d / "no" / "such" / "x.png", 8), IoError);
}

TEST(SaveImage, RoundTripByteIdentical) {
  TempDir d("img");
  std::mt19937_64 rng(7);
  for (int depth : {8, 16}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int w = 1 + static_cast<int>(rng() % 40), h = 1 + static_cast<int>(rng() % 40);
      const double hi = std::ldexp(1.0, depth) - 1.0;
      std::vector<double> v(static_cast<std::size_t>(w) * h);
      for (double& x : v) x = static_cast<double>(rng() % static_cast<std::uint64_t>(hi + 1));
      const Image img(w, h, hi, v);
      save_image(img, d / "r1.png", depth);
      const Image back = load_image(d / "r1.png");
      EXPECT_EQ(back.data(), v);
      EXPECT_EQ(back.max_value(), hi);
      save_image(back, d / "r2.png", depth);
      EXPECT_EQ(testing_support::read_bytes(d / "r1.png"), testing_support::read_bytes(d / "r2.png"));
    }
  }
}

TEST(Bilinear, PixelCentersAndClamp) {
  Image img(2, 2, 10, std::vector<double>{0, 2, 4, 6});
  EXPECT_DOUBLE_EQ(img.bilinear(0.5, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(img.bilinear(1.5, 1.5), 6.0);
  EXPECT_DOUBLE_EQ(img.bilinear(1.0, 1.0), 3.0);
  EXPECT_DOUBLE_EQ(img.bilinear(-5.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(img.bilinear(1.0, 9.0), 5.0);
}

// ---------------------------------------------------------------------------
// Masks

TEST(MaskSet, SingleBlock) {
  TempDir d("mask");
  LabelImage li(20, 10);
  for (int y = 2; y < 6; ++y)
    for (int x = 3; x < 13; ++x) li(x, y) = 1;
  save_label_image(li, d / "m.png");
  const RibMaskSet set = load_mask_set(d / "m.png");
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.masks[0].label, 1);
  EXPECT_EQ(set.masks[0].pixel_count(), 40u);
}

TEST(MaskSet, LabelsOrdered) {
  TempDir d("mask");
  LabelImage li(20, 20);
  for (int y = 12; y < 16; ++y)
    for (int x = 2; x < 8; ++x) li(x, y) = 3;
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 8; ++x) li(x, y) = 1;
  save_label_image(li, d / "m.png");
  const RibMaskSet set = load_mask_set(d / "m.png");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.masks[0].label, 1);
  EXPECT_EQ(set.masks[1].label, 3);
}

TEST(MaskSet, PaletteRasterGivesIndices) {
  TempDir d("mask");
  std::vector<std::uint16_t> v(16 * 16, 0);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 10; ++x) v[y * 16 + x] = 5;
  write_png(d / "p.png", 16, 16, 8, PNG_COLOR_TYPE_PALETTE, v);
  const RibMaskSet set = load_mask_set(d / "p.png");
  ASSERT_EQ(set.size(), 1u);
  EXPECT_EQ(set.masks[0].label, 5);
  EXPECT_EQ(set.masks[0].pixel_count(), 24u);
  // palette is not accepted as an intensity image
  EXPECT_THROW(load_image(d / "p.png"), FormatError);
}

TEST(MaskSet, DiagonalBlobsDisconnected) {
  LabelImage li(20, 20);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      li(x + 2, y + 2) = 4;
      li(x + 5, y + 5) = 4;
    }
  try {
    masks_from_labels(li);
    FAIL() << "expected a mask error";
  } catch (const MaskError& e) {
    EXPECT_EQ(e.label(), 4);
    EXPECT_NE(std::string(e.what()).find("disconnected"), std::string::npos);
  }
}

TEST(MaskSet, DegenerateNamesLabel) {
  LabelImage li(20, 20);
  for (int x = 0; x < 7; ++x) li(x + 2, 2) = 9;
  try {
    masks_from_labels(li);
    FAIL();
  } catch (const MaskError& e) {
    EXPECT_EQ(e.label(), 9);
    EXPECT_NE(std::string(e.what()).find("degenerate"), std::string::npos);
  }
}

TEST(MaskSet, JsonManifest) {
  TempDir d("mask");
  LabelImage a(16, 16), b(16, 16);
  for (int y = 2; y < 5; ++y)
    for (int x = 2; x < 10; ++x) a(x, y) = 255;
  for (int y = 9; y < 13; ++y)
    for (int x = 3; x < 11; ++x) b(x, y) = 1;
  save_label_image(a, d / "a.png");
  save_label_image(b, d / "b.png");
  {
    std::ofstream os(d / "ribs.json");
    os << R"({"ribs":[{"label":7,"file":"b.png"},{"label":2,"file":"a.png"}]})";
  }
  const RibMaskSet set = load_mask_set(d / "ribs.json");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.masks[0].label, 2);
  EXPECT_EQ(set.masks[0].pixel_count(), 24u);
  EXPECT_EQ(set.masks[1].label, 7);
  EXPECT_EQ(set.masks[1].pixel_count(), 32u);
  {
    std::ofstream os(d / "bad.json");
    os << R"({"ribz":[]})";
  }
  EXPECT_THROW(load_mask_set(d / "bad.json"), FormatError);
}

// ---------------------------------------------------------------------------
// Contour tracing

TEST(TraceContour, SquareBlock) {
  Bitmap b = blank(8, 8);
  for (int y = 2; y < 5; ++y)
    for (int x = 3; x < 6; ++x) b.set(x, y);
  const Contour c = trace_contour(b);
  ASSERT_EQ(c.size(), 4u);
  EXPECT_DOUBLE_EQ(c.length(), 12.0);
  EXPECT_DOUBLE_EQ(c.area(), 9.0);
  EXPECT_EQ(c.vertices()[0], (Vec2{3, 2}));
}

TEST(TraceContour, SingleRowDegenerate) {
  Bitmap b = blank(12, 3);
  for (int x = 1; x < 11; ++x) b.set(x, 1);
  EXPECT_THROW(trace_contour(b), DomainError);
  LabelImage li(12, 3);
  for (int x = 1; x < 11; ++x) li(x, 1) = 1;
  EXPECT_THROW(masks_from_labels(li), MaskError);
}

namespace {

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

// Blob grown by a random walk of filled 2x2 stamps, holes then filled by a
// flood from the border.
Bitmap random_blob(std::mt19937_64& rng, int W, int H) {
  Bitmap b(W, H);
  int x = W / 2, y = H / 2;
  const int steps = 30 + static_cast<int>(rng() % 200);
  for (int i = 0; i < steps; ++i) {
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) b.set(x + dx, y + dy);
    switch (rng() % 4) {
      case 0: x = std::min(W - 4, x + 1); break;
      case 1: x = std::max(2, x - 1); break;
      case 2: y = std::min(H - 4, y + 1); break;
      default: y = std::max(2, y - 1); break;
    }
  }
  Bitmap outside(W, H);
  std::vector<std::pair<int, int>> stack{{0, 0}};
  outside.set(0, 0);
  while (!stack.empty()) {
    auto [cx, cy] = stack.back();
    stack.pop_back();
    const int nx[4] = {cx + 1, cx - 1, cx, cx}, ny[4] = {cy, cy, cy + 1, cy - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || ny[k] < 0 || nx[k] >= W || ny[k] >= H) continue;
      if (b(nx[k], ny[k]) || outside(nx[k], ny[k])) continue;
      outside.set(nx[k], ny[k]);
      stack.push_back({nx[k], ny[k]});
    }
  }
  for (int yy = 0; yy < H; ++yy)
    for (int xx = 0; xx < W; ++xx)
      if (!outside(xx, yy)) b.set(xx, yy);
  return b;
}

}  // namespace

TEST(TraceContour, RandomBlobsEncloseTheirPixels) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const Bitmap b = random_blob(rng, 48, 40);
    if (count_components(b) != 1) continue;
    const Contour c = trace_contour(b);
    EXPECT_GT(c.area(), 0.0);
    EXPECT_DOUBLE_EQ(c.area(), static_cast<double>(b.count())) << "trial " << trial;
    std::size_t agree = 0, total = 0;
    for (int y = 0; y < b.height; ++y)
      for (int x = 0; x < b.width; ++x) {
        ++total;
        agree += c.contains({x + 0.5, y + 0.5}) == b(x, y);
      }
    EXPECT_GE(static_cast<double>(agree), 0.99 * static_cast<double>(total));
    const auto& v = c.vertices();
    const std::size_t n = v.size();
    bool simple = true;
    for (std::size_t i = 0; i < n && simple; ++i)
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        if (segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
          simple = false;
          break;
        }
      }
    EXPECT_TRUE(simple) << "trial " << trial;
  }
}

TEST(TraceContour, HoleIsIgnored) {
  Bitmap b(10, 10);
  for (int y = 1; y < 8; ++y)
    for (int x = 1; x < 8; ++x)
      if (!(x == 4 && y == 4)) b.set(x, y);
  const Contour c = trace_contour(b);
  EXPECT_DOUBLE_EQ(c.area(), 49.0);
  EXPECT_EQ(c.size(), 4u);
}

TEST(TraceContour, PinchKeepsLargestLoop) {
  // two squares sharing one corner; 4-connectivity would already reject
  // this as a mask, but the tracer itself must still terminate sensibly
  Bitmap b(12, 12);
  for (int y = 1; y < 5; ++y)
    for (int x = 1; x < 5; ++x) b.set(x, y);
  for (int y = 5; y < 8; ++y)
    for (int x = 5; x < 8; ++x) b.set(x, y);
  const Contour c = trace_contour(b);
  EXPECT_DOUBLE_EQ(c.area(), 16.0);
}

TEST(ContourFit, RectangleCornersKept) {
  Bitmap b(40, 20);
  for (int y = 4; y < 14; ++y)
    for (int x = 5; x < 35; ++x) b.set(x, y);
  const Contour lattice = trace_contour(b);
  const Contour fit = regularize_contour(lattice);
  EXPECT_NEAR(fit.area(), lattice.area(), 0.02 * lattice.area());
  for (const Vec2& corner : lattice.vertices()) EXPECT_LT(fit.distance(corner), 0.75);
  const Contour same = regularize_contour(lattice, ContourFit{0.0, 45.0, 4.0});
  EXPECT_EQ(same.vertices(), lattice.vertices());
}

TEST(ContourFit, DigitizedCircleApproachesTrueCircle) {
  Bitmap b(80, 80);
  const Vec2 c{40.2, 39.7};
  const double R = 25.0;
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x)
      if (std::hypot(x + 0.5 - c.x, y + 0.5 - c.y) <= R) b.set(x, y);
  const Contour lattice = trace_contour(b);
  const Contour fit = regularize_contour(lattice);
  // radial deviation of points spread along each contour
  auto deviation = [&](const Contour& k) {
    double worst = 0.0, sq = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      const Vec2 p = k.point_at(k.length() * i / n);
      const double e = std::abs(std::hypot(p.x - c.x, p.y - c.y) - R);
      worst = std::max(worst, e);
      sq += e * e;
    }
    return std::pair{worst, std::sqrt(sq / n)};
  };
  const auto [lat_worst, lat_rms] = deviation(lattice);
  const auto [fit_worst, fit_rms] = deviation(fit);
  EXPECT_LT(fit_worst, 0.5);
  EXPECT_LT(fit_worst, lat_worst);
  EXPECT_LT(fit_rms, 0.85 * lat_rms);
}
