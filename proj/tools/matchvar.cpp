#include <iostream>
#include <string>
#include <vector>

#include "matchvar/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return matchvar::cli::run(args, std::cout, std::cerr);
}
