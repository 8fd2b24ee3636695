#include "spdelab/cli.hpp"

int main(int argc, char** argv) { return spdelab::cli_main(argc, argv); }
