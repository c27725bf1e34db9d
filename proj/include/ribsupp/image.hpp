#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace ribsupp {

// Row-major grayscale raster with 64-bit intensities.
//
// Continuous coordinates follow the pixel-corner convention used by contours:
// pixel (x, y) covers [x, x+1) x [y, y+1) and its center sits at (x+0.5, y+0.5).
class Image {
 public:
  Image() = default;
  Image(int width, int height, double max_value, double fill = 0.0)
      : width_(width), height_(height), max_value_(max_value),
        data_(static_cast<std::size_t>(checked_area(width, height)), fill) {}
  Image(int width, int height, double max_value, std::vector<double> data)
      : width_(width), height_(height), max_value_(max_value), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked_area(width, height)))
      throw ShapeError("image data length does not match " + std::to_string(width) + "x" +
                       std::to_string(height));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double max_value() const noexcept { return max_value_; }
  void set_max_value(double m) noexcept { max_value_ = m; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int x, int y) { return data_[index(x, y)]; }
  double operator()(int x, int y) const { return data_[index(x, y)]; }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<double> pixels() noexcept { return data_; }
  std::span<const double> pixels() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }
  std::string shape_string() const {
    return std::to_string(width_) + "x" + std::to_string(height_);
  }

  // Bilinear interpolation at continuous (x, y); clamp-to-edge outside the
  // outermost pixel centers.
  double bilinear(double x, double y) const {
    const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(width_ - 1));
    const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(height_ - 1));
    const int x0 = std::min(static_cast<int>(u), width_ - 1);
    const int y0 = std::min(static_cast<int>(v), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = u - x0;
    const double fy = v - y0;
    const double top = (*this)(x0, y0) * (1.0 - fx) + (*this)(x1, y0) * fx;
    const double bot = (*this)(x0, y1) * (1.0 - fx) + (*this)(x1, y1) * fx;
    return top * (1.0 - fy) + bot * fy;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void clamp_to_range() {
    for (double& v : data_) v = std::clamp(v, 0.0, max_value_);
  }

 private:
  static long long checked_area(int w, int h) {
    if (w < 0 || h < 0) throw ShapeError("negative image dimensions");
    return static_cast<long long>(w) * h;
  }

  int width_ = 0;
  int height_ = 0;
  double max_value_ = 0.0;
  std::vector<double> data_;
};

// Binary raster, same indexing as Image.
struct Bitmap {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> bits;

  Bitmap() = default;
  Bitmap(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool operator()(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }
};

// Integer label raster (0 = background).
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<int> labels;

  LabelImage() = default;
  LabelImage(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}
  int& operator()(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  int operator()(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

}  // namespace ribsupp
