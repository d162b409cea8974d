#include "whatif/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return whatif::run_cli(argc, argv, std::cout, std::cerr); }
