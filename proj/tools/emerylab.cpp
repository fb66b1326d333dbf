#include <iostream>

#include "emerylab/cli.hpp"

int main(int argc, char** argv) { return emerylab::cli::run(argc, argv, std::cout, std::cerr); }
