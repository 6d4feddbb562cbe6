#pragma once

#include "detmac/types.hpp"

namespace detmac {

/// Base superframe duration: 960 symbols, i.e. 15.36 ms.
inline constexpr std::int64_t kBaseSuperframeSymbols = 960;

/// Slotted CSMA/CA backoff period (aUnitBackoffPeriod).
inline constexpr std::int64_t kBackoffPeriodSymbols = 20;

struct SuperframeConfig {
    int bo = 0;
    int so = 0;
    int n_max = 0;
    int slots_per_superframe = 16;
    /// Minimum number of CAP cells that must survive in every superframe.
    int min_cap_slots = 0;
    /// Spacing of preferred GBS positions; 0 selects slots_per_superframe / 4.
    int gbs_stride = 0;

    /// Number of superframes planned ahead: 2^n_max.
    int horizon() const { return 1 << n_max; }

    /// Throws Error(ConfigViolation) when the orders or slot layout are inconsistent.
    void validate() const;

    bool operator==(const SuperframeConfig&) const = default;
};

SimTime beacon_interval(const SuperframeConfig& config);

/// Active portion of the superframe (CAP + CFP). Throws ConfigViolation if so > bo.
SimTime active_portion(const SuperframeConfig& config);

SimTime slot_duration(const SuperframeConfig& config);

/// Nominal start of (superframe counter, slot).
SimTime slot_start(const SuperframeConfig& config, std::int64_t superframe, int slot);

} // namespace detmac
