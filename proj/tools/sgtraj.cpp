#include "sgtraj/cli.hpp"

int main(int argc, char** argv) { return sgtraj::cli::run(argc, argv); }
