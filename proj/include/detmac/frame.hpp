#pragma once

// Simulation-level MAC frames. Layouts are an internal contract, not
// byte-exact 802.15.4 frames; sizes are carried as on-air symbol counts.

#include "detmac/schedule.hpp"
#include "detmac/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace detmac {

enum class FrameKind { Superbeacon, Beacon, Data, GtsRequest, RssiReportMsg };

std::string_view to_string(FrameKind kind);

/// GTS request as relayed towards the PAN coordinator.
struct GtsRequestBody {
    NodeId requester = 0;
    GtsRequest request;
};

/// PAN coordinator decision on a request, a PDS grant or an SGTS merge.
/// Carried inside superbeacons and repeated in coordinator beacons.
struct GtsConfirm {
    NodeId addressee = 0;
    bool granted = false;
    Allocation alloc;
    std::int64_t effective_superframe = 0; ///< horizon boundary at which it applies
    std::int64_t issued_superframe = 0;
    std::string reason; ///< refusal reason, empty when granted
};

struct BeaconBody {
    std::vector<GtsConfirm> confirms;
};

using FrameBody = std::variant<std::monostate, GtsRequestBody, RssiReport, BeaconBody>;

struct Frame {
    FrameKind kind = FrameKind::Data;
    NodeId source = 0;
    NodeId destination = kBroadcast;
    int payload_symbols = 0; ///< on-air length, PHY header included
    std::uint32_t sequence = 0;
    SimTime enqueued;
    FrameBody body;

    SimTime airtime() const { return SimTime::symbols(payload_symbols); }
};

/// Default on-air sizes in symbols (2 symbols per octet at 250 kb/s).
inline constexpr int kBeaconSymbols = 40;
inline constexpr int kDataSymbols = 50;
inline constexpr int kRequestSymbols = 30;
inline constexpr int kReportSymbols = 40;

} // namespace detmac
