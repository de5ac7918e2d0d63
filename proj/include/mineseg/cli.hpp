#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mineseg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitMissingInput = 3;

/// Parses `args` (without the program name) and runs one subcommand. Failures
/// print a single "error <Class>: <message>" line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mineseg::cli
