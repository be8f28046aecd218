#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return mpflow::cli::main_cli(argc, argv, std::cout, std::cerr); }
