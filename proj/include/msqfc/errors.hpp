#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace msqfc {

/// Base of every error raised by the library. The CLI maps the concrete
/// type onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid grid, crystal, solver or mode parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Fields with mismatched grids, ranks or domains.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Inputs for which the requested quantity is undefined (all-zero weights,
/// all-zero counts, i == j selectivity).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Window too small for a mode; only raised in strict mode.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// Adaptive step controller ran out of steps.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A field acquired NaN/Inf samples.
class NumericBlowupError : public Error {
 public:
  NumericBlowupError(const std::string& what, double last_good_z)
      : Error(what), last_good_z_(last_good_z) {}
  double last_good_z() const { return last_good_z_; }

 private:
  double last_good_z_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Scenario file failed schema validation; carries every failing field.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> failures)
      : Error(join(failures)), failures_(std::move(failures)) {}
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "validation failed:";
    for (const auto& item : items) {
      out += "\n  ";
      out += item;
    }
    return out;
  }
  std::vector<std::string> failures_;
};

}  // namespace msqfc
