#include <iostream>
#include <string>
#include <vector>

#include "rot/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return rot::cli::run(args, std::cout, std::cerr);
}
