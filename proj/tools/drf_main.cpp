#include "drf/cli.hpp"

int main(int argc, char** argv) { return drf::cli::run(argc, argv); }
