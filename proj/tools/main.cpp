#include <string>
#include <vector>

#include "cvtp/cli.hpp"

int main(int argc, char** argv) {
  return cvtp::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
