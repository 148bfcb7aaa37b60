#include "lfqa/cli.hpp"

int main(int argc, char** argv) { return lfqa::run_cli(argc, argv); }
