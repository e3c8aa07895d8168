#include <iostream>

#include "gsae/cli.hpp"

int main(int argc, char** argv) {
  return gsae::run_cli(argc, argv, std::cout, std::cerr);
}
