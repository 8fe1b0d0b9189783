#include "scstory/cli.hpp"

int main(int argc, char** argv) { return scstory::cli::run_cli(argc, argv); }
