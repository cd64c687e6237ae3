#ifndef CSPHHN_TOOLS_CLI_HPP_
#define CSPHHN_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace csphhn::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 1,
  kUsageError = 2,
  kDiverged = 3,
  kGradcheckFailed = 4,
};

// Runs one command line (args excludes the program name) and returns its
// exit code. Diagnostics go to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csphhn::cli

#endif  // CSPHHN_TOOLS_CLI_HPP_
