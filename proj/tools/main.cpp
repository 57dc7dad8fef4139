#include <iostream>

#include "commands.hpp"
#include "radbar/logging.hpp"

int main(int argc, char** argv) {
  radbar::init_logging();
  return radbar::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
