#include "shunit/cli.hpp"

int main(int argc, char** argv) { return shunit::run_cli(argc, argv); }
