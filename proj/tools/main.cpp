#include <cstdio>

int main() {
  std::puts("ami: command-line interface not wired up yet");
  return 0;
}
