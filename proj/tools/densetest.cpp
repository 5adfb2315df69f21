#include <string>
#include <vector>

#include "densetest/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return densetest::run_cli(args);
}
