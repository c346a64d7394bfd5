#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace convcast::cli {

/// Runs one command line (without the program name). Returns the exit status:
/// 0 success, 1 domain error, 2 usage error.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace convcast::cli
