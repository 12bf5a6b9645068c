#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lobsurv::cli {

// Runs the command line `args` (without the program name). Returns the
// process exit code: 0 success, 1 usage, 2 data, 3 numeric.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lobsurv::cli
