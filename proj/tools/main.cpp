#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) { return essl::cli::run(argc, argv, std::cout, std::cerr); }
