#include <string>
#include <vector>

#include "rdr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rdr::run_cli(args);
}
