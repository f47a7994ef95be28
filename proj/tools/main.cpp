#include "bkmr/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return bkmr::run_cli(argc, argv, std::cout, std::cerr); }
