#include "gnep/cli_io.hpp"

int main(int argc, char** argv) {
  return gnep::cli_main(argc, argv);
}
