#include "stabledrift/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sdrift::cli::run(argc, argv, std::cout, std::cerr); }
