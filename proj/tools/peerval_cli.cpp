#include <iostream>

#include "peerval/cli.hpp"

int main(int argc, char** argv) { return peerval::run_cli(argc, argv, std::cout, std::cerr); }
