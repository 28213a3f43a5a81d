#include "knowflow/cli.hpp"

int main(int argc, char** argv) { return knowflow::cli::run(argc, argv); }
