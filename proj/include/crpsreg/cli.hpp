#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace crpsreg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Tables and
/// summaries go to `out`, diagnostics to `err`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace crpsreg::cli
