#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cathreg::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,              ///< unreadable/unwritable files, malformed or degenerate data
  kExitUsage = 2,           ///< bad flags or out-of-range values
  kExitNonConvergence = 3,  ///< ICP did not converge; the result JSON is still written
};

/// Runs the command line `args` (without the program name). Machine-readable
/// output goes to `out` when --stdout is given; usage text and log lines go
/// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cathreg::cli
