#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "atomic_file.hpp"
#include "error.hpp"
#include "image.hpp"

namespace ribsupp {

namespace detail {

struct RawRaster {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint32_t> samples;  // one per pixel
};

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

// Reads a single-channel PNG (gray or palette indices) without any value
// transformation. Palette images yield raw indices.
inline RawRaster read_png_single_channel(const std::filesystem::path& path, bool allow_palette) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec))
    throw IoError("missing file: " + path.string());
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw IoError("cannot open: " + path.string());

  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError("not a PNG file: " + path.string());

  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) throw FormatError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  RawRaster out;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  std::string failure;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG " + path.string() + ": " + err);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.bit_depth = png_get_bit_depth(png, info);
  out.color_type = png_get_color_type(png, info);

  const int channels = png_get_channels(png, info);
  if (out.color_type == PNG_COLOR_TYPE_PALETTE) {
    if (!allow_palette) failure = "palette PNG is not a grayscale image: " + path.string();
    else if (out.bit_depth < 8) png_set_packing(png);
  } else if (out.color_type != PNG_COLOR_TYPE_GRAY || channels != 1) {
    failure = "multi-channel PNG (" + std::to_string(channels) +
              " channels) not supported: " + path.string();
  } else if (out.bit_depth != 8 && out.bit_depth != 16) {
    failure = "unsupported bit depth " + std::to_string(out.bit_depth) + ": " + path.string();
  }
  if (!failure.empty()) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(failure);
  }
  png_read_update_info(png, info);

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[y] = buffer.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const bool wide = out.color_type != PNG_COLOR_TYPE_PALETTE && out.bit_depth == 16;
  out.samples.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    const unsigned char* r = rows[y];
    for (int x = 0; x < out.width; ++x) {
      out.samples[static_cast<std::size_t>(y) * out.width + x] =
          wide ? (static_cast<std::uint32_t>(r[2 * x]) << 8) | r[2 * x + 1] : r[x];
    }
  }
  return out;
}

inline void write_png_gray(const std::filesystem::path& path, int width, int height, int bit_depth,
                           const std::vector<std::uint32_t>& samples);

}  // namespace detail

namespace detail {

inline void write_png_gray(const std::filesystem::path& path, int width, int height, int bit_depth,
                           const std::vector<std::uint32_t>& samples) {
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    FilePtr fp(std::fopen(tmp.string().c_str(), "wb"));
    if (!fp) throw IoError("unwritable path: " + path.string());
    std::string err;
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    const std::size_t bpp = bit_depth == 16 ? 2 : 1;
    std::vector<unsigned char> row(static_cast<std::size_t>(width) * bpp);
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw IoError("PNG write failed for " + path.string() + ": " + err);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::uint32_t v = samples[static_cast<std::size_t>(y) * width + x];
        if (bpp == 2) {
          row[2 * x] = static_cast<unsigned char>(v >> 8);
          row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
        } else {
          row[x] = static_cast<unsigned char>(v);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(fp.get()) != 0) throw IoError("write failed: " + path.string());
  });
}

}  // namespace detail

// Loads an 8- or 16-bit single-channel PNG. Values are kept exactly as stored;
// max_value is 2^bitdepth - 1.
inline Image load_image(const std::filesystem::path& path) {
  auto raw = detail::read_png_single_channel(path, /*allow_palette=*/false);
  std::vector<double> data(raw.samples.begin(), raw.samples.end());
  return Image(raw.width, raw.height, std::ldexp(1.0, raw.bit_depth) - 1.0, std::move(data));
}

// Quantizes to [0, 2^bitdepth - 1] with round-half-to-even.
inline std::uint32_t quantize(double v, int bit_depth) {
  const double hi = std::ldexp(1.0, bit_depth) - 1.0;
  if (!(v > 0.0)) return 0;  // also maps NaN to 0
  if (v >= hi) return static_cast<std::uint32_t>(hi);
  return static_cast<std::uint32_t>(std::nearbyint(v));
}

inline void save_image(const Image& img, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw FormatError("unsupported bit depth " + std::to_string(bit_depth));
  std::vector<std::uint32_t> samples(img.size());
  auto px = img.pixels();
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = quantize(px[i], bit_depth);
  detail::write_png_gray(path, img.width(), img.height(), bit_depth, samples);
}

// Label rasters: gray 8/16-bit or palette-indexed PNG, value = label.
inline LabelImage load_label_image(const std::filesystem::path& path) {
  auto raw = detail::read_png_single_channel(path, /*allow_palette=*/true);
  LabelImage out(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.samples.size(); ++i) out.labels[i] = static_cast<int>(raw.samples[i]);
  return out;
}

inline void save_label_image(const LabelImage& labels, const std::filesystem::path& path) {
  int max_label = 0;
  for (int v : labels.labels) {
    if (v < 0 || v > 65535) throw FormatError("label out of range: " + std::to_string(v));
    max_label = std::max(max_label, v);
  }
  std::vector<std::uint32_t> samples(labels.labels.begin(), labels.labels.end());
  detail::write_png_gray(path, labels.width, labels.height, max_label > 255 ? 16 : 8, samples);
}

}  // namespace ribsupp
