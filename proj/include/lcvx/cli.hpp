#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcvx
{

/// Exit statuses of the command-line tool.
enum ExitCode : int
{
    kExitOk = 0,
    kExitBadConfig = 1,
    kExitInconclusive = 2,
    kExitFail = 3,
    kExitSolverFailure = 4,
};

/// Runs one command. `args` excludes the program name, e.g. {"check", "problem.json"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lcvx
