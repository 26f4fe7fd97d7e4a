#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace medledger::cli {

// Runs one command line (without the program name). Returns the exit code:
// 0 on success, 1 on operational errors, 2 on usage errors.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace medledger::cli
