#pragma once

#include <stdexcept>
#include <string>

namespace reluspec {

enum class ErrorCode {
  kDimension,
  kNumeric,
  kDegenerateWeight,
  kUnsupportedOrder,
  kPrecision,
  kConfig,
  kIo,
  kParse,
  kMemory,
  kInvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The C API maps
/// `code()` onto `rs_status`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace reluspec
