#include "lassopsi/errors.hpp"

namespace lassopsi {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonPositiveWeight: return "NonPositiveWeight";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateResponse: return "DegenerateResponse";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::InfeasibleInit: return "InfeasibleInit";
    case ErrorCode::InconsistentSolution: return "InconsistentSolution";
    case ErrorCode::InsufficientDraws: return "InsufficientDraws";
    case ErrorCode::EmptyModel: return "EmptyModel";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Parse: return "Parse";
    }
    return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
    throw Error(code, std::string(to_string(code)) + ": " + what);
}

} // namespace lassopsi
