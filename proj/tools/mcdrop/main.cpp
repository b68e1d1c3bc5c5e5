#include <iostream>

#include "mcdrop/cli.hpp"

int main(int argc, char **argv) { return mcdrop::cli_main(argc, argv, std::cout, std::cerr); }
