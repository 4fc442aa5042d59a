#pragma once

namespace ruleocr::cli {

// Parses argv and runs one subcommand; returns the process exit code.
int dispatch(int argc, const char* const* argv);

}  // namespace ruleocr::cli
