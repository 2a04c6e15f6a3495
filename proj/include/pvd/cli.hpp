#pragma once

#include <iosfwd>

namespace pvd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitInfeasible = 2;
inline constexpr int kExitVerifyFailed = 3;

/// Entry point of the `pvd` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pvd
