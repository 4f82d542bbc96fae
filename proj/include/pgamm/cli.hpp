#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pgamm::cli {

enum ExitCode : int { kSuccess = 0, kError = 1, kNotConverged = 2 };

/// Runs one invocation; `args` starts with the subcommand (fit, tune,
/// simulate, evaluate). Diagnostics go to `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pgamm::cli
