#include <string>
#include <vector>

#include "zeronas/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return zeronas::cli::run(args);
}
