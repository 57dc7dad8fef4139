#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace radbar::cli {

/// Runs the radbar command line (args excludes the program name). Normal
/// output goes to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace radbar::cli
