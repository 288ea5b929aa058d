#pragma once

#include <stdexcept>
#include <string>

namespace subfins {

/// Base class for all library errors. `kind()` is a stable machine-readable
/// tag used by the CLI when emitting JSON error objects.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& expected,
              const std::string& message)
      : Error("SyntaxError", message), offset_(offset), expected_(expected) {}
  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

class UnknownVariableError : public Error {
 public:
  explicit UnknownVariableError(const std::string& name)
      : Error("UnknownVariable", "unknown variable '" + name + "'"),
        name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message)
      : Error("DomainError", message) {}
};

class RegularityError : public Error {
 public:
  explicit RegularityError(const std::string& message)
      : Error("RegularityError", message) {}
};

class SingularHessianError : public Error {
 public:
  explicit SingularHessianError(const std::string& message)
      : Error("SingularHessian", message) {}
};

class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& message, double best_residual)
      : Error("NoConvergence", message), best_residual_(best_residual) {}
  double best_residual() const { return best_residual_; }

 private:
  double best_residual_;
};

class NonHorizontalError : public Error {
 public:
  explicit NonHorizontalError(const std::string& message)
      : Error("NonHorizontal", message) {}
};

class StepFailureError : public Error {
 public:
  explicit StepFailureError(const std::string& message)
      : Error("StepFailure", message) {}
};

class UnknownSystemError : public Error {
 public:
  explicit UnknownSystemError(const std::string& name)
      : Error("UnknownSystem", "unknown system '" + name + "'") {}
};

class InvalidRegionError : public Error {
 public:
  explicit InvalidRegionError(const std::string& message)
      : Error("InvalidRegion", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("ConfigError", message) {}
};

}  // namespace subfins
