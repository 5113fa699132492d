#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spot::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2, kRuntimeFailure = 3 };

// Runs one subcommand; args excludes the program name. Diagnostics go to
// err, results to out.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spot::cli
