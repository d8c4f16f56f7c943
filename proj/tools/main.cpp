#include "subadj/cli.hpp"

int main(int argc, char** argv) { return subadj::cli_main(argc, argv); }
