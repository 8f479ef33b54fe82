#pragma once

#include <iosfwd>

namespace leebounds {

// Entry point of the command line tool. Returns the process exit code:
// 0 success, 2 configuration error, 3 data error, 4 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace leebounds
