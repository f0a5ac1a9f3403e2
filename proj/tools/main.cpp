#include <iostream>

#include "hbn/cli.hpp"

int main(int argc, char** argv) { return hbn::run_cli(argc, argv, std::cout, std::cerr); }
