#include <iostream>

#include "phasereg/cli.hpp"

int main(int argc, char** argv) { return phasereg::cli::main_entry(argc, argv, std::cout, std::cerr); }
