// Copyright Contributors to the dragon-splat project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace dragon {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitFailure = 1, // a stage failed; a partial report may exist
    kExitUsage = 2,   // bad arguments or configuration
};

/// Parses argv and runs one subcommand. Normal output goes to `out`,
/// diagnostics to `err`; nothing is written to the process streams, so
/// tests can call it in-process.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace dragon
