#include "detmac/frame.hpp"

namespace detmac {

std::string_view to_string(FrameKind kind)
{
    switch (kind) {
    case FrameKind::Superbeacon: return "superbeacon";
    case FrameKind::Beacon: return "beacon";
    case FrameKind::Data: return "data";
    case FrameKind::GtsRequest: return "gts-request";
    case FrameKind::RssiReportMsg: return "rssi-report";
    }
    return "unknown";
}

} // namespace detmac
