#include "cli.hpp"

int main(int argc, char** argv)
{
    return nlx::cli::main(argc, argv);
}
