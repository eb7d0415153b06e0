#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace critr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or unresolvable column, malformed header or config.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A data row violates a Dataset invariant. `row()` is the 1-based data row.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  [[nodiscard]] std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& what, double rcond)
      : Error(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
        rcond_(rcond) {}
  [[nodiscard]] double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class BootstrapFailureError : public Error {
 public:
  using Error::Error;
};

}  // namespace critr
