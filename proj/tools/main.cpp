#include "mktsim/cli.hpp"

int main(int argc, char** argv) { return mktsim::cli_main(argc, argv); }
