#include "am/dynamics.hpp"

#include <cstdio>

int main() {
  // Placeholder entry point; subcommands land with the sim/cli modules.
  std::puts("amsim: no command given");
  return 1;
}
