#include "imot/cli.hpp"

int main(int argc, char** argv) { return imot::run_cli(argc, argv); }
