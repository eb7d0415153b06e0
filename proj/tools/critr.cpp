#include "critr/commands.hpp"

int main(int argc, char** argv) { return critr::run_cli(argc, argv); }
