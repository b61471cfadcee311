#include <iostream>
#include <string>
#include <vector>

#include "kerrmag/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return kerrmag::cli::run(args, std::cout, std::cerr);
}
