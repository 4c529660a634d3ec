#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace repmatch::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Runs one command line (args excludes the program name). Reports go to out
// unless --out is given; diagnostics and usage text go to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace repmatch::cli
