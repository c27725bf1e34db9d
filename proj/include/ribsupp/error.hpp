#pragma once

#include <stdexcept>
#include <string>

namespace ribsupp {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  // Short machine-readable tag, e.g. "io", "mask", "domain".
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format", what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

class MaskError : public Error {
 public:
  MaskError(int label, const std::string& what)
      : Error("mask", "label " + std::to_string(label) + ": " + what), label_(label) {}
  int label() const noexcept { return label_; }

 private:
  int label_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace ribsupp
