#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace lassopsi::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kParseError = 2;
inline constexpr int kSolverFailure = 3;
inline constexpr int kEmptyModel = 4;
inline constexpr int kInsufficientDraws = 5;
inline constexpr int kBudgetExhausted = 6;

/// Runs one invocation (arguments without the program name). Results go to
/// `out` as JSON, logs and the machine-readable error line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace lassopsi::cli
