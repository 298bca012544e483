#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ticert {

enum class ErrorCode {
  DimensionMismatch,
  InvalidArgument,
  InvalidMeasure,
  InvalidMetric,
  NotGenerator,
  NotIrreducible,
  NotReversible,
  NotLipschitz,
  BudgetExceeded,
  EigenFailure,
  OptimizerStalled,
  SolverFailure,
  IndexOutOfRange,
  ParseError,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

// Every module reports failures through this type. The qualified code reads
// "<module>.<Code>", e.g. "transport.BudgetExceeded".
class Error : public std::runtime_error {
 public:
  Error(std::string module, ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  std::string qualified_code() const;

 private:
  std::string module_;
  ErrorCode code_;
};

[[noreturn]] void fail(std::string module, ErrorCode code,
                       const std::string& message);

}  // namespace ticert
