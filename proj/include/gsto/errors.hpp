#pragma once

#include <stdexcept>
#include <string>

namespace gsto {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (NaN, gamma <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// phi1' evaluated at its singular point z = 0.
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A gain function g_i left its declared [g_m, g_M] interval.
class BoundViolation : public Error {
 public:
  BoundViolation(std::size_t subsystem, double value, double lo, double hi)
      : Error("g_" + std::to_string(subsystem + 1) + " = " + std::to_string(value) +
              " outside declared bounds [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
        subsystem_(subsystem),
        value_(value) {}

  std::size_t subsystem() const noexcept { return subsystem_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t subsystem_;
  double value_;
};

/// Non-finite model output; carries the offending flat index.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t index) : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// No SPD Lyapunov certificate exists for the requested gains.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Integration left the finite range; carries the failing simulation time.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Configuration document does not match the schema; `path` is a JSON pointer.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace gsto
