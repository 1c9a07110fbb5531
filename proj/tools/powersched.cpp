#include "powersched/cli.hpp"

int main(int argc, char** argv) { return powersched::cli::run_cli(argc, argv); }
