#include "dtrx/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return dtrx::cli::run(argc, argv, std::cout, std::cerr);
}
