#include "tutor/cli.hpp"

int main(int argc, char** argv) { return tutor::cli::run(argc, argv); }
