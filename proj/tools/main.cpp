#include "advtag/cli.hpp"

int main(int argc, char** argv) { return advtag::run_cli(argc, argv); }
