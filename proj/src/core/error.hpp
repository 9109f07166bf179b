#pragma once

#include <stdexcept>
#include <string>

namespace selekt {

enum class ErrorCode {
  kInvalidArgument = 1,  // bad config, flag, or precondition
  kNotFound,             // missing file, run, or checkpoint
  kIo,                   // read/write/format failure
  kShapeMismatch,
  kNonFinite,            // divergence or NaN gradient
  kDivergedRun,
  kRuntime,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string field = {})
      : std::runtime_error(message), code_(code), field_(std::move(field)) {}

  ErrorCode code() const { return code_; }
  // Config field or flag name the error refers to; empty when not applicable.
  const std::string& field() const { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

inline void require(bool cond, ErrorCode code, const std::string& message,
                    const std::string& field = {}) {
  if (!cond) throw Error(code, message, field);
}

}  // namespace selekt
