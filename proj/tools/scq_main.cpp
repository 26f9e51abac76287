#include <iostream>
#include <string>
#include <vector>

#include "scq/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return scq::run(args, std::cout, std::cerr);
}
