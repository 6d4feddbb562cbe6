#include "detmac/timing.hpp"

#include "detmac/error.hpp"

#include <string>

namespace detmac {

namespace {

// Keeps 15360 us << order well inside int64.
constexpr int kMaxOrder = 40;

} // namespace

void SuperframeConfig::validate() const
{
    if (so < 0 || bo < 0)
        throw Error(Errc::ConfigViolation, "beacon and superframe orders must be >= 0");
    if (bo > kMaxOrder)
        throw Error(Errc::ConfigViolation, "bo=" + std::to_string(bo) + " exceeds " + std::to_string(kMaxOrder));
    if (so > bo)
        throw Error(Errc::ConfigViolation,
                    "SO <= BO required (so=" + std::to_string(so) + ", bo=" + std::to_string(bo) + ")");
    if (n_max < 0 || n_max > 16)
        throw Error(Errc::ConfigViolation, "n_max must lie in [0, 16]");
    if (slots_per_superframe < 2)
        throw Error(Errc::ConfigViolation, "at least 2 slots per superframe are required");
    const std::int64_t sfap = (kBaseSuperframeSymbols * kMicrosPerSymbol) << so;
    if (sfap % slots_per_superframe != 0)
        throw Error(Errc::ConfigViolation,
                    "active portion of " + std::to_string(sfap) + " us is not divisible into "
                        + std::to_string(slots_per_superframe) + " slots");
    if (min_cap_slots < 0 || min_cap_slots > slots_per_superframe - 1)
        throw Error(Errc::ConfigViolation, "min_cap_slots out of range");
    if (gbs_stride < 0)
        throw Error(Errc::ConfigViolation, "gbs_stride must be >= 0");
}

SimTime beacon_interval(const SuperframeConfig& config)
{
    if (config.bo < 0 || config.bo > kMaxOrder)
        throw Error(Errc::ConfigViolation, "bo out of range");
    return SimTime::symbols(kBaseSuperframeSymbols << config.bo);
}

SimTime active_portion(const SuperframeConfig& config)
{
    if (config.so < 0)
        throw Error(Errc::ConfigViolation, "so must be >= 0");
    if (config.so > config.bo)
        throw Error(Errc::ConfigViolation, "SO <= BO required");
    return SimTime::symbols(kBaseSuperframeSymbols << config.so);
}

SimTime slot_duration(const SuperframeConfig& config)
{
    return SimTime::micros(active_portion(config).us / config.slots_per_superframe);
}

SimTime slot_start(const SuperframeConfig& config, std::int64_t superframe, int slot)
{
    return beacon_interval(config) * superframe + slot_duration(config) * slot;
}

} // namespace detmac
