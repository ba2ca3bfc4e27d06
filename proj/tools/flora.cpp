#include "flora/cli.hpp"

int main(int argc, char** argv) { return flora::cli::cli_dispatch(argc, argv); }
