#pragma once

#include <iosfwd>

namespace dispnet::cli {

/// Entry point of the `dispnet` tool. Returns the process exit status; all
/// output goes to `out` (results) and `err` (settings log, diagnostics).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dispnet::cli
