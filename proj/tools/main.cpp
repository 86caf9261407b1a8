#include <iostream>

#include "wassdoe/cli.hpp"

int main(int argc, char** argv) { return wassdoe::cli::run(argc, argv, std::cout, std::cerr); }
