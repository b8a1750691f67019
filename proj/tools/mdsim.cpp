#include "mdsim/cli.hpp"

int main(int argc, char** argv) { return mdsim::execute_command(argc, argv); }
