#include "newsalpha/cli/app.hpp"

int main(int argc, char** argv) { return newsalpha::cli::dispatch_argv(argc, argv); }
