#include "detmac/csma.hpp"

#include "detmac/error.hpp"

#include <algorithm>

namespace detmac {

CsmaCa::CsmaCa(CsmaParams params) : params_(params), be_(params.min_be) {}

CsmaCa::Step CsmaCa::on_boundary(bool channel_busy, RngStream& rng)
{
    if (draw_) {
        remaining_ = static_cast<int>(rng.uniform_int(0, (std::int64_t{1} << be_) - 1));
        draw_ = false;
    }
    if (remaining_ > 0) {
        --remaining_;
        return Step::Wait;
    }
    if (channel_busy) {
        ++nb_;
        be_ = std::min(be_ + 1, params_.max_be);
        contention_window_ = 2;
        if (nb_ > params_.max_backoffs)
            return Step::Failure;
        draw_ = true;
        return Step::Wait;
    }
    if (--contention_window_ == 0)
        return Step::Transmit;
    return Step::Wait;
}

CsmaResult csma_ca_attempt(const CsmaParams& params, SimTime airtime, CapWindow window, SimTime guard,
                           const std::function<bool(SimTime)>& busy, RngStream& rng)
{
    const SimTime period = SimTime::symbols(kBackoffPeriodSymbols);
    if (airtime + guard + period > window.end - window.start)
        throw Error(Errc::FrameTooLong, "frame of " + std::to_string(airtime.us) + " us cannot fit the CAP");

    CsmaCa csma(params);
    for (SimTime t = window.start; t + period <= window.end; t += period) {
        switch (csma.on_boundary(busy(t), rng)) {
        case CsmaCa::Step::Wait:
            break;
        case CsmaCa::Step::Failure:
            return CsmaResult{std::nullopt, true, false, csma.backoffs()};
        case CsmaCa::Step::Transmit: {
            const SimTime start = t + period;
            if (start + airtime + guard > window.end)
                return CsmaResult{std::nullopt, false, true, csma.backoffs()};
            return CsmaResult{start, false, false, csma.backoffs()};
        }
        }
    }
    return CsmaResult{std::nullopt, false, true, csma.backoffs()};
}

} // namespace detmac
