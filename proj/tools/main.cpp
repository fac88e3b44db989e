#include <string>
#include <vector>

#include "rsed/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rsed::run_command(args);
}
