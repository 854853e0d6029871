#include "ragredteam/cli.hpp"

int main(int argc, char** argv) {
    return ragredteam::cli::run(argc, argv);
}
