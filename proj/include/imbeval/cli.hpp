#pragma once

#include <string>
#include <vector>

namespace imbeval::cli {

// Parses and executes one subcommand. args excludes the program name.
// Exit codes: 0 success, 2 input validation, 3 numerical non-convergence,
// 4 I/O failure.
int run(const std::vector<std::string>& args);

}  // namespace imbeval::cli
