#include <iostream>
#include <string>
#include <vector>

#include "neurostrike_cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return neurostrike::cli::dispatch(args, std::cout, std::cerr);
}
