#include <iostream>

#include "aelstm/app.hpp"

int main(int argc, char** argv) { return aelstm::run_cli(argc, argv, std::cout, std::cerr); }
