#ifndef GWIL_TOOLS_CLI_HPP_
#define GWIL_TOOLS_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace gwil::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kInfeasible = 3, kTrainingAborted = 4 };

/// Runs one command line (args[0] is the program name) and returns its exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);

}  // namespace gwil::cli

#endif  // GWIL_TOOLS_CLI_HPP_
