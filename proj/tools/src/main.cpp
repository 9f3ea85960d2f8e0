#include <iostream>

#include "ipcnet_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ipcnet::cli::run(args, std::cout, std::cerr);
}
