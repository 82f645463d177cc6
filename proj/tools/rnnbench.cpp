#include "rnnbench/cli.hpp"

int main(int argc, char** argv) { return rnnbench::cli_main(argc, argv); }
