#include <iostream>

#include "cli.hpp"
#include "dwrpm/runtime.hpp"

int main(int argc, char** argv) {
  dwrpm::tune_allocator();
  return dwrpm::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
