#include "detmac/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return detmac::cli_main(argc, argv, std::cout, std::cerr);
}
