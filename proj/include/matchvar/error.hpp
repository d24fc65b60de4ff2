#pragma once

#include <stdexcept>
#include <string>

namespace matchvar {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidDimension,
  kDomain,
  kNoRoot,
  kNonconvergentBisection,
  kMissingConstants,
  kSchemaMismatch,
  kIo,
  kParse,
  kInsufficientGroup,
  kRankDeficientDesign,
  kDegeneratePropensity,
  kUnsupportedSpec,
  kEmptyInput,
};

/// Library-wide exception; `code()` lets callers (the CLI in particular) map
/// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace matchvar
