#include <iostream>

#include "mlptest/cli.hpp"

int main(int argc, char **argv) {
  return mlptest::cli::main_entry(argc, argv, std::cout, std::cerr);
}
