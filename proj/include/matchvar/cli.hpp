#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace matchvar::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitInvalid = 2,
  kExitMethodMismatch = 3,
  kExitInsufficientGroup = 4,
  kExitAssertion = 5,
};

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace matchvar::cli
