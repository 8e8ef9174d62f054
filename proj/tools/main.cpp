#include "drugqml/cli.hpp"

int main(int argc, char** argv) { return drugqml::cli::run(argc, argv); }
