#include <cstdio>

int main(int argc, char** argv) {
  (void)argc;
  (void)argv;
  std::fprintf(stderr, "tropiscope: command-line front end not wired yet\n");
  return 1;
}
