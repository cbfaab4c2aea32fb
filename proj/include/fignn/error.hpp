#pragma once

#include <stdexcept>
#include <string>

namespace fignn {

/// Base of every error raised by the library. `kind()` is a stable,
/// machine-readable tag used by the CLI error line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error("dimension", w) {}
};

struct IndexError : Error {
  explicit IndexError(const std::string& w) : Error("index", w) {}
};

struct NumericalDomainError : Error {
  explicit NumericalDomainError(const std::string& w) : Error("numerical_domain", w) {}
};

struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error("contract", w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config", w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io", w) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error("training", w) {}
};

}  // namespace fignn
