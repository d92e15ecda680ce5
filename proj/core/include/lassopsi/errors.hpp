#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lassopsi {

enum class ErrorCode {
    InvalidArgument,
    RankDeficient,
    NonPositiveWeight,
    DegenerateGeometry,
    NoConvergence,
    DegenerateResponse,
    EmptyRange,
    InfeasibleInit,
    InconsistentSolution,
    InsufficientDraws,
    EmptyModel,
    BudgetExhausted,
    Config,
    Parse,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure the library reports is an Error carrying a stable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) fail(code, what);
}

} // namespace lassopsi
