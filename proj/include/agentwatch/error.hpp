#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agentwatch {

enum class ErrorCode {
    infeasible_request,
    illegal_action,
    unknown_property,
    unknown_value,
    invalid_distribution,
    degenerate_distribution,
    singular_system,
    rollback_past_checkpoint,
    invalid_intervention,
    invalid_argument,
    negative_request,
    api_error,
    malformed_generation,
    backend_failure,
    insufficient_data,
    invalid_config,
    parse_error,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so callers
// (mostly the harness) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace agentwatch
