#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rngsentinel::cli {

inline constexpr int kExitClean = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name. Everything the command
/// prints goes to `out` (JSON) and `err` (diagnostics); `in` backs "-" and a
/// missing --input.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace rngsentinel::cli
