#include "hktgnn/cli.hpp"

int main(int argc, char** argv) { return hktgnn::run_cli(argc, argv); }
