#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace memscope::cli {

/// Runs the command line `args` (without the program name). Returns 0 on
/// success, 2 on usage errors and 1 when a module reports an error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

const char* version();

}  // namespace memscope::cli
