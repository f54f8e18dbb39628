#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srcv/errors.hpp"

namespace srcv::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitIncompatible = 5,
  kExitGradcheck = 6,
};

int exit_code_for(ErrorKind kind) noexcept;

// Runs `srcv <args...>` in-process. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srcv::cli
