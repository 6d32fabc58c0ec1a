#include <iostream>

#include "swarmnas/cli.hpp"

int main(int argc, char** argv) { return swarmnas::cli_main(argc, argv, std::cout, std::cerr); }
