#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cellseg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kValidation = 3,
  kRuntime = 4,
};

/// Runs the command line `args` (args[0] is the program name) and returns the
/// process exit code. Messages go to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cellseg::cli
