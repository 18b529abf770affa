#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace subriem {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitNumeric = 3,
  kExitNotFound = 4,
};

/// Runs one subcommand. argv[0] is the program name. JSON goes to out, error documents to err.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace subriem
