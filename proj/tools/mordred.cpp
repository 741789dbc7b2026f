#include "mordred/cli.hpp"

int main(int argc, char** argv) { return mordred::cli::run(argc, argv); }
