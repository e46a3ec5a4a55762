#include "nod/cli.hpp"

int main(int argc, char** argv) { return nod::cli::main(argc, argv); }
