#include <linkmix/cli.hpp>

int main(int argc, char** argv) { return linkmix::cli::run_cli(argc, argv); }
