#include "ppsim/cli.hpp"

int main(int argc, char** argv) { return ppsim::run_cli(argc, argv); }
