#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gsreg::cli {

// Exit statuses of the gsreg tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad arguments, I/O or format errors
inline constexpr int kExitRegistrationFailure = 2;
inline constexpr int kExitInsufficientOverlap = 3;  // fallback transform still written

// Runs the tool with argv-style arguments (args[0] is the program name).
// Results go to `out`; progress lines and JSON error objects go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsreg::cli
