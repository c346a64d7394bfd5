#include "cli.hpp"

int main(int argc, char** argv) { return convcast::cli::run(argc, argv); }
