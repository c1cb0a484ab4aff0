#include "advisor/cli.hpp"

int main(int argc, char** argv) { return advisor::cli::run(argc, argv); }
