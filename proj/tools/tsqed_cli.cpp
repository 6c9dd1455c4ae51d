#include "tsqed/runner.hpp"

int main(int argc, char **argv) { return tsqed::runner::main(argc, argv); }
