#include "dmh/cli.hpp"

int main(int argc, char** argv) { return dmh::cli::main(argc, argv); }
