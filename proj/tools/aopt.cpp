#include "aopt/cli.hpp"

int main(int argc, char** argv) { return aopt::cli::run(argc, argv); }
