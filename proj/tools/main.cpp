#include "commands.hpp"

int main(int argc, char** argv) { return rtdnas::cli::run_cli(argc, argv); }
