#pragma once

#include <iosfwd>

namespace hyperproto::cli {

enum ExitCode : int { kSuccess = 0, kInvariantFailure = 1, kConfigError = 2, kNumericFailure = 3 };

/// Parses and runs one command line. Normal output goes to `out`,
/// diagnostics to `err`; the return value is the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hyperproto::cli
