#include <iostream>
#include <string>
#include <vector>

#include "compresslab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return compresslab::dispatch(args, std::cout, std::cerr);
}
