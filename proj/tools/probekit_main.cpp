#include <iostream>
#include <string>
#include <vector>

#include "probekit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return probekit::cli_dispatch(args, std::cout, std::cerr);
}
