#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lqrflow/errors.hpp"

namespace lqrflow::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kDomainError = 3,
  kNumericalFailure = 4,
};

int exit_code_for(ErrorKind kind);

/// Runs the tool with argv-style arguments (args[0] is the program name).
/// Results go to `out`; machine-readable error JSON goes to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lqrflow::cli
