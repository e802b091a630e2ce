#include "gsreg/error.hpp"

namespace gsreg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kEmptyModel: return "empty_model";
    case ErrorCode::kEmptyCloud: return "empty_cloud";
    case ErrorCode::kDegenerate: return "degenerate";
    case ErrorCode::kNoOverlap: return "no_overlap";
    case ErrorCode::kRegistrationFailure: return "registration_failure";
    case ErrorCode::kInsufficientOverlap: return "insufficient_overlap";
    case ErrorCode::kConstruction: return "construction";
  }
  return "unknown";
}

}  // namespace gsreg
