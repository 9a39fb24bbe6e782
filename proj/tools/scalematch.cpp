#include <iostream>

#include "scalematch/cli.hpp"

int main(int argc, char** argv) {
  return scalematch::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
