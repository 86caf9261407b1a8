#pragma once

#include <iosfwd>

namespace wassdoe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitNumerical = 4;

inline constexpr const char* kVersion = "0.1.0";

/// Parses the command line, runs one subcommand and maps failures to exit
/// codes: 2 usage, 3 invalid input or configuration, 4 numerical failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wassdoe::cli
