#include "twindecomp/cli.hpp"

int main(int argc, char** argv) { return twindecomp::cli::run(argc, argv); }
