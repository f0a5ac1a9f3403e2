#pragma once

#include <iosfwd>

#include "hbn/error.hpp"

namespace hbn {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitFit = 3, kExitNumerical = 4 };

/// Exit code for an error raised by a subcommand; fit-engine failures only
/// count as fit failures inside `fit`.
int exit_code_for(ErrorKind kind, bool fitting) noexcept;

/// Entry point of the toolkit executable: parses argv (argv[0] is the program
/// name), runs one subcommand and returns its exit code. Messages go to out/err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hbn
