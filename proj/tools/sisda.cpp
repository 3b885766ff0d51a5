#include <iostream>

#include "sisda/cli.hpp"

int main(int argc, char** argv) {
  return sisda::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
