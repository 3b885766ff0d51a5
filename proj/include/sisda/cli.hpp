#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sisda::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2 };

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Rounds to `digits` significant decimal digits.
double round_significant(double v, int digits);

}  // namespace sisda::cli
