#include <nwot/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return nwot::cli::run(argc, argv, std::cout, std::cerr); }
