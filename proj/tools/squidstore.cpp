#include <iostream>

#include "squidstore/cli.hpp"

int main(int argc, char** argv) { return squidstore::cli::dispatch(argc, argv, std::cout, std::cerr); }
