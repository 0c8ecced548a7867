#include "tomo/cli.hpp"

int main(int argc, char** argv) { return tomo::run_cli(argc, argv); }
