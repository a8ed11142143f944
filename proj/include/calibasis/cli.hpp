#pragma once

#include <iosfwd>

namespace calibasis::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitTerminal = 2;
inline constexpr int kExitInfeasible = 3;

// Entry point of the calibasis tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace calibasis::cli
