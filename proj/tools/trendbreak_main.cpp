#include "trendbreak/cli.hpp"

int main(int argc, char** argv) { return trendbreak::cli::run_cli(argc, argv); }
