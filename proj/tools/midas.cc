#include "midas/cli.h"

int main(int argc, char** argv) { return midas::run_cli(argc, argv); }
