#include <iostream>

#include "dnea/cli.hpp"

int main(int argc, char** argv) { return dnea::run_cli(argc, argv, std::cout, std::cerr); }
