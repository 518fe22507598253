#include <iostream>

#include "vflow_cli.hpp"

int main(int argc, char** argv) { return vflow::cli::run(argc, argv, std::cout, std::cerr); }
