#include "aed/cli.hpp"

int main(int argc, char** argv) { return aed::cli::run_cli(argc, argv); }
