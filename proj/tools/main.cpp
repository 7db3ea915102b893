#include <string>
#include <vector>

#include "imbeval/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return imbeval::cli::run(args);
}
