#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scoreembed {

// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

// Runs one command line (args[0] is the program name). Reads standard input
// from `in` for `predict`; reports go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace scoreembed
