#include <iostream>

#include "sfgame/cli.hpp"

int main(int argc, char** argv) { return sfgame::run_cli(argc, argv, std::cout, std::cerr); }
