#include "mcw/cli.hpp"

int main(int argc, char** argv) { return mcw::cli::run(argc, argv); }
