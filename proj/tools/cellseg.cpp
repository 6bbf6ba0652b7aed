#include <iostream>
#include <string>
#include <vector>

#include "cellseg/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cellseg::cli::run(args, std::cout, std::cerr);
}
