#include <iostream>
#include <string>
#include <vector>

#include "rtrl/cli.hpp"

int main(int argc, char** argv) {
  return rtrl::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
