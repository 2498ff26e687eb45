// Placeholder until the CLI lands; subcommands are wired up in a later pass.
#include <cstdio>

int main() {
  std::puts("emlab: not yet wired");
  return 1;
}
