#include "bgadj/cli.hpp"

int main(int argc, char** argv) { return bgadj::cli::run(argc, argv); }
