#include "edid/cli.hpp"

int main(int argc, char** argv) {
    return edid::run_cli(argc, argv);
}
