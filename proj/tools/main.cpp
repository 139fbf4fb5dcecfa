#include "birksync/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return birksync::run_cli(argc, argv, std::cout, std::cerr); }
