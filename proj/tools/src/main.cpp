#include <iostream>

#include "sketchedit_app/cli.hpp"

int main(int argc, char** argv) { return sketchedit::app::cli_run(argc, argv, std::cout, std::cerr); }
