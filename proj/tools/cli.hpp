#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmflow::cli {

/// Runs the command line (args excludes the program name). Returns the
/// process exit code: 0 success, 1 invalid input, 2 solver failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace mmflow::cli
