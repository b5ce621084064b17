#include "biasaudit/cli.h"

int main(int argc, char** argv) { return biasaudit::run_cli(argc, argv); }
