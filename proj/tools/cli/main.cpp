#include "cli.hpp"

int main(int argc, char** argv) { return spdregime::cli::run(argc, argv); }
