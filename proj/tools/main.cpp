#include "toolsmith/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return toolsmith::cli::run_cli(args, std::cout, std::cerr, toolsmith::cli::process_env());
}
