#include "ticert/error.hpp"

namespace ticert {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidMeasure: return "InvalidMeasure";
    case ErrorCode::InvalidMetric: return "InvalidMetric";
    case ErrorCode::NotGenerator: return "NotGenerator";
    case ErrorCode::NotIrreducible: return "NotIrreducible";
    case ErrorCode::NotReversible: return "NotReversible";
    case ErrorCode::NotLipschitz: return "NotLipschitz";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::OptimizerStalled: return "OptimizerStalled";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(std::string module, ErrorCode code, const std::string& message)
    : std::runtime_error(module + "." + std::string(to_string(code)) + ": " +
                         message),
      module_(std::move(module)),
      code_(code) {}

std::string Error::qualified_code() const {
  return module_ + "." + std::string(to_string(code_));
}

void fail(std::string module, ErrorCode code, const std::string& message) {
  throw Error(std::move(module), code, message);
}

}  // namespace ticert
