#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polyfeti {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitGeometry = 3, kExitSolver = 4 };

/// Runs the command line `args` (without the program name). Subcommands:
/// mesh-gen, cut, solve, experiment, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polyfeti
