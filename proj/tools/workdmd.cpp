#include "workdmd/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return workdmd::cli::run(argc, argv, std::cout, std::cerr);
}
