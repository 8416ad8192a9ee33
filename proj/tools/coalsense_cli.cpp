#include "coalsense/cli.hpp"

int main(int argc, char** argv) { return coalsense::cli::parse_and_run(argc, argv); }
