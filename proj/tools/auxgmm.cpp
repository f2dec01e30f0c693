#include <iostream>

#include "auxgmm/cli.hpp"

int main(int argc, char** argv) { return auxgmm::run_cli(argc, argv, std::cout, std::cerr); }
