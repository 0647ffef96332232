#include "dpr/cli/cli.hpp"

int main(int argc, char** argv) { return dpr::run_cli(argc, argv); }
