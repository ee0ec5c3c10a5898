#include <iostream>

#include "maser/cli.hpp"

int main(int argc, char** argv) { return maser::cli::main(argc, argv, std::cout, std::cerr); }
