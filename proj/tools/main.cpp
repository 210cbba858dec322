#include "datslice/cli.hpp"

int main(int argc, char** argv) { return datslice::cli::run(argc, argv); }
