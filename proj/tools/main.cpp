#include "commands.hpp"

int main(int argc, char** argv) { return lazyadv::cli::run_cli(argc, argv); }
