#include "activessf/cli.hpp"

int main(int argc, char** argv) { return activessf::run_cli(argc, argv); }
