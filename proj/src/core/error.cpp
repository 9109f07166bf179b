#include "error.hpp"

namespace selekt {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid_argument";
    case ErrorCode::kNotFound:
      return "not_found";
    case ErrorCode::kIo:
      return "io";
    case ErrorCode::kShapeMismatch:
      return "shape_mismatch";
    case ErrorCode::kNonFinite:
      return "non_finite";
    case ErrorCode::kDivergedRun:
      return "diverged_run";
    case ErrorCode::kRuntime:
      return "runtime";
  }
  return "runtime";
}

}  // namespace selekt
