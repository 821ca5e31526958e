#include <iostream>
#include <string>
#include <vector>

#include "dropkit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dropkit::run_cli(args, std::cout, std::cerr);
}
