#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qnetsim
{
    enum class ErrorCode
    {
        ScheduleInPast,
        CausalityViolation,
        EmptyTopology,
        NotNormalized,
        PartialOverwrite,
        KeyNotFound,
        StateTooLarge,
        InvalidRequest,
        TransportFailure,
        UnknownSession,
        InvalidParameter,
        SchemaViolation,
        InvalidSchedule,
    };

    constexpr std::string_view to_string(ErrorCode code) noexcept
    {
        switch (code)
        {
        case ErrorCode::ScheduleInPast: return "SCHEDULE_IN_PAST";
        case ErrorCode::CausalityViolation: return "CAUSALITY_VIOLATION";
        case ErrorCode::EmptyTopology: return "EMPTY_TOPOLOGY";
        case ErrorCode::NotNormalized: return "NOT_NORMALIZED";
        case ErrorCode::PartialOverwrite: return "PARTIAL_OVERWRITE";
        case ErrorCode::KeyNotFound: return "KEY_NOT_FOUND";
        case ErrorCode::StateTooLarge: return "STATE_TOO_LARGE";
        case ErrorCode::InvalidRequest: return "INVALID_REQUEST";
        case ErrorCode::TransportFailure: return "TRANSPORT_FAILURE";
        case ErrorCode::UnknownSession: return "UNKNOWN_SESSION";
        case ErrorCode::InvalidParameter: return "INVALID_PARAMETER";
        case ErrorCode::SchemaViolation: return "SCHEMA_VIOLATION";
        case ErrorCode::InvalidSchedule: return "INVALID_SCHEDULE";
        }
        return "UNKNOWN";
    }

    class Error : public std::runtime_error
    {
    public:
        Error(ErrorCode code, const std::string& what)
            : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
        {
        }

        ErrorCode code() const noexcept { return code_; }

    private:
        ErrorCode code_;
    };
} // namespace qnetsim
