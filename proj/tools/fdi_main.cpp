#include <string>
#include <vector>

#include "fdi/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fdi::cli::run(std::move(args));
}
