#pragma once

#include <ostream>

namespace sfgame {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitIo = 2,
  kExitDimension = 3,
  kExitViolation = 4,
};

/// Entry point of the `sfgame` tool; argv[0] is the program name. Returns
/// one of the exit codes above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sfgame
