#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wproj::cli {

/// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

/// Runs the tool on `args` (without the program name). The run directory
/// path is printed to `out` on success; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wproj::cli
