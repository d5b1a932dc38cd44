#include <string>
#include <vector>

#include "qexgan/cli.hpp"

int main(int argc, char** argv) {
    return qexgan::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
