#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace percdepth::cli {

// Parses and dispatches one command line. Exit codes: 0 success, 1 runtime or
// numeric failure, 2 usage or configuration error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace percdepth::cli
