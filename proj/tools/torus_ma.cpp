#include "torus_ma/cli.hpp"

int main(int argc, char** argv) { return torus_ma::cli_main(argc, argv); }
