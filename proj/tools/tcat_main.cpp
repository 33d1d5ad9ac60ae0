#include "tcat/cli.hpp"

int main(int argc, char** argv) { return tcat::cli::run(argc, argv); }
