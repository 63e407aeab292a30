#include "rrl/error.hpp"

namespace rrl {

std::string_view category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotFound: return "io.not_found";
    case ErrorCode::IoFailure: return "io.failure";
    case ErrorCode::ParseError: return "data.parse_error";
    case ErrorCode::NonMonotoneTime: return "data.non_monotone_time";
    case ErrorCode::NonPositivePrice: return "data.non_positive_price";
    case ErrorCode::TooShort: return "data.too_short";
    case ErrorCode::IndexOutOfRange: return "data.index_out_of_range";
    case ErrorCode::EmptyRange: return "data.empty_range";
    case ErrorCode::InsufficientData: return "data.insufficient_data";
    case ErrorCode::LengthMismatch: return "data.length_mismatch";
    case ErrorCode::DimensionMismatch: return "data.dimension_mismatch";
    case ErrorCode::DegenerateVariance: return "numeric.degenerate_variance";
    case ErrorCode::DegenerateDownside: return "numeric.degenerate_downside";
    case ErrorCode::NonFiniteObjective: return "numeric.non_finite_objective";
    case ErrorCode::InvalidConfig: return "usage.invalid_config";
    case ErrorCode::InvalidRate: return "usage.invalid_rate";
    case ErrorCode::Usage: return "usage.error";
  }
  return "unknown";
}

}  // namespace rrl
