#include "agentwatch/error.hpp"

namespace agentwatch {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::infeasible_request: return "infeasible-request";
    case ErrorCode::illegal_action: return "illegal-action";
    case ErrorCode::unknown_property: return "unknown-property";
    case ErrorCode::unknown_value: return "unknown-value";
    case ErrorCode::invalid_distribution: return "invalid-distribution";
    case ErrorCode::degenerate_distribution: return "degenerate-distribution";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::rollback_past_checkpoint: return "rollback-past-checkpoint";
    case ErrorCode::invalid_intervention: return "invalid-intervention";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::negative_request: return "negative-request";
    case ErrorCode::api_error: return "api-error";
    case ErrorCode::malformed_generation: return "malformed-generation";
    case ErrorCode::backend_failure: return "backend-failure";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::parse_error: return "parse-error";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

} // namespace agentwatch
