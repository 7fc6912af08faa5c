#include "cli_main.hpp"

int main(int argc, char** argv) { return ncrsm::cli::cli_main(argc, argv); }
