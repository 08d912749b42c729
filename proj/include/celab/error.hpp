#pragma once

#include <stdexcept>
#include <string>

namespace celab {

/// Base class of every error raised by the library. `kind()` is a stable
/// machine-readable tag used in run reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error("domain", w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};
struct PrecisionError : Error {
  explicit PrecisionError(const std::string& w) : Error("precision", w) {}
};
struct GeometryError : Error {
  explicit GeometryError(const std::string& w) : Error("geometry", w) {}
};
struct NotMultimodalError : Error {
  explicit NotMultimodalError(const std::string& w) : Error("not-multimodal", w) {}
};
struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& w) : Error("insufficient-data", w) {}
};
struct HypothesisError : Error {
  explicit HypothesisError(const std::string& w) : Error("hypothesis", w) {}
};
struct StructuralError : Error {
  explicit StructuralError(const std::string& w) : Error("structural", w) {}
};
/// Two maps whose symbolic data differ; `witness()` is the first address
/// present for one map only.
class NotConjugateError : public Error {
 public:
  NotConjugateError(const std::string& w, std::string witness) : Error("not-conjugate", w), witness_(std::move(witness)) {}
  const std::string& witness() const noexcept { return witness_; }

 private:
  std::string witness_;
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

}  // namespace celab
