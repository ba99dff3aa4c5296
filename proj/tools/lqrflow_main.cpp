#include <iostream>
#include <string>
#include <vector>

#include "lqrflow/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return lqrflow::cli::run(args, std::cout, std::cerr);
}
