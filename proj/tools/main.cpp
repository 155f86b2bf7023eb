#include "vbhp/cli.hpp"

int main(int argc, char** argv) { return vbhp::run_cli(argc, argv); }
