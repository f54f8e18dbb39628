#include <iostream>
#include <string>
#include <vector>

#include "srcv/cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return srcv::cli::run_cli(args, std::cout, std::cerr);
}
