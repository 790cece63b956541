#include <iostream>

#include "app.hpp"

int main(int argc, char** argv) { return runmax::app::run(argc, argv, std::cout, std::cerr); }
