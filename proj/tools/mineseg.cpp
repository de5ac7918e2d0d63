#include <iostream>
#include <string>
#include <vector>

#include "mineseg/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mineseg::cli::run(args, std::cout, std::cerr);
}
