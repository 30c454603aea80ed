#include "lpspde/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return lpspde::run_cli(argc, argv, std::cout, std::cerr); }
