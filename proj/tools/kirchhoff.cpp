/**
 * @file kirchhoff.cpp
 * @brief Command-line entry point; see cli.hpp for the subcommands.
 */
#include "kirchhoff/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return kirchhoff::run_command(args, std::cout, std::cerr);
}
