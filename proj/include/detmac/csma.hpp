#pragma once

// Slotted CSMA/CA as used in the contention access period.

#include "detmac/rng.hpp"
#include "detmac/timing.hpp"
#include "detmac/types.hpp"

#include <functional>
#include <optional>

namespace detmac {

struct CsmaParams {
    int min_be = 3;       ///< macMinBE
    int max_be = 5;       ///< macMaxBE
    int max_backoffs = 4; ///< macMaxCSMABackoffs

    bool operator==(const CsmaParams&) const = default;
};

/// Per-frame contention state, advanced once per backoff-period boundary.
class CsmaCa {
public:
    enum class Step { Wait, Transmit, Failure };

    explicit CsmaCa(CsmaParams params = {});

    /// `channel_busy` is the CCA result at this boundary; only consulted when
    /// the backoff has expired. Transmit means: start at the next boundary.
    Step on_boundary(bool channel_busy, RngStream& rng);

    /// A transmission that would overrun the CAP is deferred: both CCAs are
    /// repeated at the start of the next contention window.
    void defer() { contention_window_ = 2; }

    int backoffs() const { return nb_; }
    int backoff_exponent() const { return be_; }

private:
    CsmaParams params_;
    int nb_ = 0;
    int be_ = 0;
    int contention_window_ = 2;
    int remaining_ = 0;
    bool draw_ = true;
};

struct CapWindow {
    SimTime start;
    SimTime end;
};

struct CsmaResult {
    std::optional<SimTime> tx_start; ///< empty on failure or deferral
    bool channel_access_failure = false;
    bool deferred = false; ///< backoff ran past the window end
    int backoffs = 0;
};

/// Single-contender slotted CSMA/CA over one CAP window. `busy(t)` reports
/// the CCA result at boundary t. Throws FrameTooLong if the frame (plus
/// guard) cannot fit in the window at all.
CsmaResult csma_ca_attempt(const CsmaParams& params, SimTime airtime, CapWindow window, SimTime guard,
                           const std::function<bool(SimTime)>& busy, RngStream& rng);

} // namespace detmac
