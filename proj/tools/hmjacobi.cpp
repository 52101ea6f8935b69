#include "hmjacobi/cli.hpp"

int main(int argc, char** argv) {
  return hmjacobi::run_cli(std::vector<std::string>(argv, argv + argc));
}
