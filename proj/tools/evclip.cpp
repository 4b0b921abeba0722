#include "evclip/cli.hpp"

int main(int argc, char** argv) { return evclip::cli::run(argc, argv); }
