#include "reluspec/error.hpp"

namespace reluspec {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kDegenerateWeight: return "degenerate-weight";
    case ErrorCode::kUnsupportedOrder: return "unsupported-order";
    case ErrorCode::kPrecision: return "precision";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kMemory: return "memory";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace reluspec
