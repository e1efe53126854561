#include <string>
#include <vector>

#include "ergo/config.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return ergo::config::run_cli(args);
}
