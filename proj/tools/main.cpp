#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    taleweaver::cli::configure_logging();
    std::vector<std::string> args(argv + 1, argv + argc);
    return taleweaver::cli::run(args, std::cin, std::cout, std::cerr);
}
