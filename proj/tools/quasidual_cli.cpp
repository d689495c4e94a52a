#include <iostream>

#include "quasidual/cli.hpp"

int main(int argc, char** argv) { return quasidual::run_cli(argc, argv, std::cout, std::cerr); }
