#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pasta::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

/// Runs one command line (without the program name). Failures print a single
/// `error[<kind>]: ...` line on `err` and return the matching exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pasta::cli
