#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "contour.hpp"
#include "error.hpp"
#include "image.hpp"
#include "png_io.hpp"

namespace ribsupp {

struct RibMask {
  int label = 0;
  Bitmap bitmap;
  Contour contour;  // traced from bitmap

  std::size_t pixel_count() const { return bitmap.count(); }
};

// Masks ordered by label; processing order is the stored order.
struct RibMaskSet {
  std::vector<RibMask> masks;

  bool empty() const noexcept { return masks.empty(); }
  std::size_t size() const noexcept { return masks.size(); }
  int width() const { return masks.empty() ? 0 : masks.front().bitmap.width; }
  int height() const { return masks.empty() ? 0 : masks.front().bitmap.height; }

  // Union of all masks.
  Bitmap union_bitmap(int w, int h) const {
    Bitmap u(w, h);
    for (const auto& m : masks)
      for (std::size_t i = 0; i < u.bits.size(); ++i)
        if (m.bitmap.bits[i]) u.bits[i] = 1;
    return u;
  }

  LabelImage to_label_image() const {
    LabelImage out(width(), height());
    for (const auto& m : masks)
      for (std::size_t i = 0; i < out.labels.size(); ++i)
        if (m.bitmap.bits[i]) out.labels[i] = m.label;
    return out;
  }
};

inline constexpr std::size_t kMinMaskPixels = 8;

// Number of 4-connected foreground components.
inline int count_components(const Bitmap& b) {
  std::vector<int> seen(b.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;
  int comps = 0;
  for (int y = 0; y < b.height; ++y)
    for (int x = 0; x < b.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * b.width + x;
      if (!b.bits[i] || seen[i]) continue;
      ++comps;
      seen[i] = 1;
      stack.push_back({x, y});
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        const int nx[4] = {cx + 1, cx - 1, cx, cx};
        const int ny[4] = {cy, cy, cy + 1, cy - 1};
        for (int k = 0; k < 4; ++k) {
          if (!b(nx[k], ny[k])) continue;
          const std::size_t j = static_cast<std::size_t>(ny[k]) * b.width + nx[k];
          if (!seen[j]) {
            seen[j] = 1;
            stack.push_back({nx[k], ny[k]});
          }
        }
      }
    }
  return comps;
}

// Validates a single rib bitmap and traces its contour.
inline RibMask make_rib_mask(int label, Bitmap bitmap) {
  const std::size_t n = bitmap.count();
  if (n == 0) throw MaskError(label, "empty mask");
  if (n < kMinMaskPixels)
    throw MaskError(label, "degenerate mask (" + std::to_string(n) + " pixels, need >= " +
                               std::to_string(kMinMaskPixels) + ")");
  if (count_components(bitmap) != 1) throw MaskError(label, "disconnected foreground");
  RibMask m;
  m.label = label;
  try {
    m.contour = trace_contour(bitmap);
  } catch (const DomainError& e) {
    throw MaskError(label, e.what());
  }
  m.bitmap = std::move(bitmap);
  return m;
}

inline RibMaskSet masks_from_labels(const LabelImage& labels) {
  std::map<int, Bitmap> per_label;
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) {
      const int l = labels(x, y);
      if (l == 0) continue;
      auto it = per_label.find(l);
      if (it == per_label.end()) it = per_label.emplace(l, Bitmap(labels.width, labels.height)).first;
      it->second.set(x, y);
    }
  RibMaskSet set;
  for (auto& [label, bm] : per_label) set.masks.push_back(make_rib_mask(label, std::move(bm)));
  return set;
}

// Accepts an indexed/gray label PNG, or a JSON manifest
// { "ribs": [ {"label": int, "file": path}, ... ] } of per-rib binary PNGs
// (any nonzero value is foreground; relative paths resolve against the manifest).
inline RibMaskSet load_mask_set(const std::filesystem::path& path) {
  if (path.extension() != ".json") return masks_from_labels(load_label_image(path));

  std::ifstream is(path);
  if (!is) throw IoError("missing file: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed mask manifest " + path.string() + ": " + e.what());
  }
  if (!doc.contains("ribs") || !doc["ribs"].is_array())
    throw FormatError("mask manifest lacks a \"ribs\" array: " + path.string());

  std::vector<std::pair<int, Bitmap>> entries;
  int w = -1, h = -1;
  for (const auto& rib : doc["ribs"]) {
    if (!rib.contains("label") || !rib.contains("file"))
      throw FormatError("manifest entry needs \"label\" and \"file\"");
    const int label = rib["label"].get<int>();
    if (label <= 0) throw FormatError("manifest labels must be positive");
    std::filesystem::path file = rib["file"].get<std::string>();
    if (file.is_relative()) file = path.parent_path() / file;
    const LabelImage li = load_label_image(file);
    if (w < 0) {
      w = li.width;
      h = li.height;
    } else if (li.width != w || li.height != h) {
      throw ShapeError("manifest rasters differ in shape: " + file.string());
    }
    Bitmap bm(li.width, li.height);
    for (std::size_t i = 0; i < li.labels.size(); ++i) bm.bits[i] = li.labels[i] != 0;
    entries.emplace_back(label, std::move(bm));
  }
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  RibMaskSet set;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0 && entries[i].first == entries[i - 1].first)
      throw MaskError(entries[i].first, "duplicate label in manifest");
    set.masks.push_back(make_rib_mask(entries[i].first, std::move(entries[i].second)));
  }
  return set;
}

}  // namespace ribsupp
