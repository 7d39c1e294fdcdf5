#pragma once

#include <iosfwd>

namespace urkf::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kNumerical = 3,
  kIo = 4,
};

/// Parses argv and runs one subcommand. Reports go to `out`, diagnostics to
/// `err`. Returns one of ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace urkf::cli
