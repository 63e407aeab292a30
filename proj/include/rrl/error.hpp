#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rrl {

// Every failure raised by the library carries one of these codes. The CLI maps
// the code's category (the part before the dot in category()) to an exit code.
enum class ErrorCode {
  // io
  NotFound,
  IoFailure,
  // data
  ParseError,
  NonMonotoneTime,
  NonPositivePrice,
  TooShort,
  IndexOutOfRange,
  EmptyRange,
  InsufficientData,
  LengthMismatch,
  DimensionMismatch,
  // numeric
  DegenerateVariance,
  DegenerateDownside,
  NonFiniteObjective,
  // config / usage
  InvalidConfig,
  InvalidRate,
  Usage,
};

std::string_view category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view category() const noexcept { return rrl::category(code_); }

 private:
  ErrorCode code_;
};

}  // namespace rrl
