#include <iostream>

#include "leebounds/cli.hpp"

int main(int argc, char** argv) { return leebounds::run_cli(argc, argv, std::cout, std::cerr); }
