#include "cli.hpp"

int main(int argc, char** argv) { return mmflow::cli::run(argc, argv); }
