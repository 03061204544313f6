#include <iostream>

#include "pnewton/harness.hpp"

int main(int argc, char** argv) {
  return pnewton::cli_main(argc, argv, std::cout, std::cerr);
}
