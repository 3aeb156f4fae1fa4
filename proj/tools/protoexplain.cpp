#include <iostream>

#include "protoexplain/cli.hpp"

int main(int argc, char** argv) { return protoexplain::run_cli(argc, argv, std::cout, std::cerr); }
