#include "commands.hpp"

int main(int argc, char** argv) { return kggen::cli::run(argc, argv); }
