#include <iostream>

#include "protonet/cli.hpp"

int main(int argc, char** argv) { return protonet::run_cli(argc, argv, std::cout, std::cerr); }
