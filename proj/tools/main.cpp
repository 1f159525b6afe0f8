#include "tabraster/cli.hpp"

int main(int argc, char** argv) { return tabraster::run_cli(argc, argv); }
