#include "vidkd/cli.hpp"

int main(int argc, char** argv) { return vidkd::cli::run(argc, argv); }
