#include "lsw/cli.hpp"

int main(int argc, char** argv) { return lsw::cli::main(argc, argv); }
