#include "lcft/cli.hpp"

int main(int argc, char **argv) { return lcft::cli::run(argc, argv); }
