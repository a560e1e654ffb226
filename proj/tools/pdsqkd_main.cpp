#include "pdsqkd/cli.hpp"

int main(int argc, char** argv) { return pdsqkd::cli::run(argc, argv); }
