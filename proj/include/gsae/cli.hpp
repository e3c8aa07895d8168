#pragma once

#include <ostream>

namespace gsae {

// Full command-line entry point. Returns the process exit code: 0 on
// success, 1 for validation/configuration problems, 2 for I/O and format
// problems.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gsae
