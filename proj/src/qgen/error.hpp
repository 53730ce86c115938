#pragma once

#include <stdexcept>
#include <string>

namespace qgen {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kConfig = 4,
  kStage = 5,
  kNotFound = 6,
  kDegenerate = 7,
  kConflict = 8,
};

// All library failures are reported as qgen::Error; the C API maps the code
// onto its status enum.
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

}  // namespace qgen
