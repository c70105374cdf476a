#include "acqa/cli.hpp"

int main(int argc, char** argv) {
    return acqa::run_cli(argc, argv);
}
