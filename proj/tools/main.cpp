#include <iostream>

#include "ctxsched/cli.hpp"

int main(int argc, char** argv) { return ctxsched::run_cli(argc, argv, std::cout, std::cerr); }
