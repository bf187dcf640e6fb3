#include <iostream>
#include <string>
#include <vector>

#include "hotbox/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return hotbox::cli::main(args, std::cout, std::cerr);
}
