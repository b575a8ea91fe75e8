#include "hdvplan/cli.hpp"

int main(int argc, char** argv) { return hdvplan::cli::main(argc, argv); }
