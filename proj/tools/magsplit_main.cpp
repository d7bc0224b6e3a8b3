#include "magsplit/cli.hpp"

int main(int argc, char** argv) { return magsplit::cli_main(argc, argv); }
