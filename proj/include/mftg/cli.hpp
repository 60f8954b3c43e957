#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mftg::cli {

/// Process exit codes. Each failure class has its own code.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kValidation = 3,
  kNumeric = 4,       // singular coupling matrix or coefficient overflow
  kResource = 5,
  kVerification = 6,
};

/// Runs the command line `args` (without the program name) and returns the
/// exit code. Diagnostics go to `err`, progress and summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mftg::cli
