#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fadeflow {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUnexpected = 1,
    kExitConfig = 2,
    kExitBlowUp = 3,
    kExitHypothesis = 4,
    kExitResidual = 5,
    kExitNoReturnPairs = 6,
};

/// Runs `fadeflow <verb> [flags]`; args exclude the program name.
/// Results go to `out` (or --out), diagnostics and logs to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fadeflow
