#include <iostream>

#include "sponge/cli.hpp"

int main(int argc, char** argv) { return sponge::cli::main(argc, argv, std::cout, std::cerr); }
