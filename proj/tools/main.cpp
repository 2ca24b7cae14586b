#include "graphroute/cli.hpp"

int main(int argc, char** argv) { return graphroute::harness::run_cli(argc, argv); }
