#include "cli.hpp"

int main(int argc, char** argv) { return cpriv::cli_main(argc, argv); }
