#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pclab::cli {

inline constexpr const char* kToolName = "pclab";
inline constexpr const char* kVersion = "0.3.0";

enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1,
    kExitConfig = 2,
    kExitDivergence = 3,
};

/// Runs one command line (without the program name) and returns the exit code.
/// Diagnostics go to `err`, progress and help text to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pclab::cli
