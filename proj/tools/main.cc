#include <iostream>
#include <string>
#include <vector>

#include "affineglue/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return affineglue::RunCli(args, std::cout, std::cerr);
}
