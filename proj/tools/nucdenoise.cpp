#include <string>
#include <vector>

#include "nuc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nuc::cli_run(args);
}
