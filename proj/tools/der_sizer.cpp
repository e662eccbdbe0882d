#include <iostream>

#include "dersizer/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dersizer::run_cli(args, std::cout, std::cerr);
}
