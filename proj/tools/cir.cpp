#include <iostream>

#include "cir/cli/cli.hpp"

int main(int argc, char** argv) {
  return cir::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
