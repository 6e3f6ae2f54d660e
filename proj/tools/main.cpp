#include "bodykit/cli.hpp"

int main(int argc, char** argv) { return bodykit::cli::run(argc, argv); }
