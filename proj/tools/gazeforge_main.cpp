#include <string>
#include <vector>

#include "gazeforge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gazeforge::run_cli(std::move(args));
}
