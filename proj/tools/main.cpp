#include <string>
#include <vector>

#include "paai_cli.hpp"

int main(int argc, char** argv) {
    return paai::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
