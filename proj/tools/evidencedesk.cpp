#include "evidencedesk/api.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return evidencedesk::api::run_cli(argc, argv, std::cout, std::cerr);
}
