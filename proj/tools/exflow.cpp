#include <exflow/cli/app.hpp>

int main(int argc, char** argv) {
  return exflow::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
