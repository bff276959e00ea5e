#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nstate {

// Exit codes: 0 success, 1 runtime failure (I/O, format, numeric), 2 usage.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nstate
