#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gsreg {

enum class ErrorCode {
  kInvalidArgument,
  kIo,
  kFormat,
  kEmptyModel,
  kEmptyCloud,
  kDegenerate,
  kNoOverlap,
  kRegistrationFailure,
  kInsufficientOverlap,
  kConstruction,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// command-line front end can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace gsreg
