#include <iostream>

#include "urbanvis/cli.hpp"

int main(int argc, char** argv) { return urbanvis::run_cli(argc, argv, std::cout, std::cerr); }
