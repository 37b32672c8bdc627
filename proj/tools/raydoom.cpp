#include <iostream>

#include "raydoom/commands.hpp"

int main(int argc, char** argv) { return raydoom::cli::run(argc, argv, std::cout, std::cerr); }
