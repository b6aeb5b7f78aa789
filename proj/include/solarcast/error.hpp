#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace solarcast {

/// Bad arguments or violated preconditions (bad coordinates, k out of range, ...).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input outside the range an algorithm is valid for.
class OutOfRangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed or inconsistent input files. The message names the file, row and column.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric failure during a computation (non-positive capacity, failed fit, ...).
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rolling-window plan cannot be built on the given calendar.
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Model cannot be explained as requested (e.g. missing cover counts).
class ExplainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-fatal diagnostics. The default sink writes to stderr; tests swap it to capture.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace solarcast
