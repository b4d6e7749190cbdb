#include "maplab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return maplab::cli::dispatch(argc, argv, std::cout, std::cerr);
}
