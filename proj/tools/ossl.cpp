#include "ossl/cli.hpp"

int main(int argc, char** argv) { return ossl::cli::run(argc, argv); }
