#include "monge/cli.hpp"

int main(int argc, char** argv) { return monge::run_cli(argc, argv); }
