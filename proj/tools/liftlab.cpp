#include "liftlab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return liftlab::cli_main(argc, argv, std::cout, std::cerr); }
