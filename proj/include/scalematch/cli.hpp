#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scalematch {

/// Process exit codes of the `scalematch` tool.
inline constexpr int kExitOk = 0;          ///< includes localization failures
inline constexpr int kExitRuntime = 1;     ///< I/O, dataset or sidecar problems
inline constexpr int kExitUsage = 2;       ///< bad flags or configuration

/// Entry point of the `scalematch` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scalematch
