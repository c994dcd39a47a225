#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace affineglue {

// Exit codes of the command-line tool.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNoModel = 2;

// Runs the tool on `args` (without the program name).
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace affineglue
