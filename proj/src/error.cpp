#include "detmac/error.hpp"

namespace detmac {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::ConfigViolation: return "ConfigViolation";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::SlotExhausted: return "SlotExhausted";
    case Errc::DuplicateGbs: return "DuplicateGbs";
    case Errc::LevelOutOfRange: return "LevelOutOfRange";
    case Errc::UnknownOwner: return "UnknownOwner";
    case Errc::MissingReport: return "MissingReport";
    case Errc::SlotOutOfRange: return "SlotOutOfRange";
    case Errc::NonPositiveDistance: return "NonPositiveDistance";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::MoreThanTwoAttempts: return "MoreThanTwoAttempts";
    case Errc::NotSynchronized: return "NotSynchronized";
    case Errc::FrameTooLong: return "FrameTooLong";
    case Errc::PastEvent: return "PastEvent";
    case Errc::TopologyInvalid: return "TopologyInvalid";
    case Errc::BadTopology: return "BadTopology";
    case Errc::NonMonotone: return "NonMonotone";
    case Errc::ParseError: return "ParseError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

} // namespace detmac
