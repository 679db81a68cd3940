#include "skelmorph/error.hpp"

namespace skelmorph {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::parse: return "PARSE";
        case ErrorCode::empty_input: return "EMPTY_INPUT";
        case ErrorCode::size: return "SIZE";
        case ErrorCode::parameter: return "PARAMETER";
        case ErrorCode::shape: return "SHAPE";
        case ErrorCode::numeric: return "NUMERIC";
        case ErrorCode::budget_exceeded: return "BUDGET_EXCEEDED";
        case ErrorCode::domain: return "DOMAIN";
        case ErrorCode::reference: return "REFERENCE";
        case ErrorCode::duplicate: return "DUPLICATE";
        case ErrorCode::degenerate: return "DEGENERATE";
        case ErrorCode::precondition: return "PRECONDITION";
        case ErrorCode::config: return "CONFIG";
        case ErrorCode::io: return "IO";
    }
    return "UNKNOWN";
}

int exit_code(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::config:
        case ErrorCode::parameter:
            return 2;
        case ErrorCode::numeric:
            return 4;
        case ErrorCode::budget_exceeded:
            return 5;
        default:
            return 3;
    }
}

}  // namespace skelmorph
