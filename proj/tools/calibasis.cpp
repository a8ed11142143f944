#include <iostream>

#include "calibasis/cli.hpp"

int main(int argc, char** argv) { return calibasis::cli::run(argc, argv, std::cout, std::cerr); }
