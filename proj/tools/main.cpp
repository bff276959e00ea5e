#include <iostream>
#include <string>
#include <vector>

#include "nstate/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nstate::run_cli(args, std::cout, std::cerr);
}
