#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace detmac {

enum class Errc {
    ConfigViolation,
    InvalidArgument,
    SlotExhausted,
    DuplicateGbs,
    LevelOutOfRange,
    UnknownOwner,
    MissingReport,
    SlotOutOfRange,
    NonPositiveDistance,
    UnknownNode,
    MoreThanTwoAttempts,
    NotSynchronized,
    FrameTooLong,
    PastEvent,
    TopologyInvalid,
    BadTopology,
    NonMonotone,
    ParseError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace detmac
