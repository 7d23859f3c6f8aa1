#include "cli.h"

#include <iostream>

int main(int argc, char ** argv) {
    return pcfglab::cli::run(argc, argv, std::cerr);
}
