#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>

#include "error.hpp"

namespace ribsupp {

// Writes through a sibling temporary file and renames it into place, so a
// failed write never leaves a partial output behind.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& writer) {
  const auto parent = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  std::error_code ec;
  if (!std::filesystem::is_directory(parent, ec))
    throw IoError("unwritable path (no such directory): " + path.string());
  auto tmp = path;
  tmp += ".partial";
  try {
    writer(tmp);
  } catch (...) {
    std::filesystem::remove(tmp, ec);
    throw;
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into place: " + path.string());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_atomically(path, [&](const std::filesystem::path& tmp) {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError("unwritable path: " + path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
  });
}

}  // namespace ribsupp
