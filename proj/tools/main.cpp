#include "ruleocr/cli.hpp"

int main(int argc, char** argv) { return ruleocr::cli::dispatch(argc, argv); }
