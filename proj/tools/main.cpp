#include "cli.hpp"

int main(int argc, char** argv) { return epibound::cli::run(argc, argv); }
