#include "evonash/cli.hpp"

int main(int argc, char** argv) { return evonash::cli::run(argc, argv); }
