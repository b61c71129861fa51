#include <iostream>

#include "covprior/cli.hpp"

int main(int argc, char** argv) { return covprior::cli::run(argc, argv, std::cout, std::cerr); }
