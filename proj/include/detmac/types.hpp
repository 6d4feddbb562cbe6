#pragma once

#include <compare>
#include <cstdint>
#include <limits>

namespace detmac {

using NodeId = std::uint32_t;

inline constexpr NodeId kBroadcast = std::numeric_limits<NodeId>::max();

/// 802.15.4 2.4 GHz PHY: one symbol is 16 us.
inline constexpr std::int64_t kMicrosPerSymbol = 16;

/// Simulation time in integer microseconds.
struct SimTime {
    std::int64_t us = 0;

    static constexpr SimTime micros(std::int64_t v) { return SimTime{v}; }
    static constexpr SimTime symbols(std::int64_t v) { return SimTime{v * kMicrosPerSymbol}; }

    constexpr double seconds() const { return static_cast<double>(us) * 1e-6; }
    constexpr double millis() const { return static_cast<double>(us) * 1e-3; }

    friend constexpr auto operator<=>(SimTime, SimTime) = default;
    friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.us + b.us}; }
    friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.us - b.us}; }
    friend constexpr SimTime operator*(SimTime a, std::int64_t k) { return SimTime{a.us * k}; }
    friend constexpr SimTime operator*(std::int64_t k, SimTime a) { return SimTime{a.us * k}; }
    constexpr SimTime& operator+=(SimTime o) { us += o.us; return *this; }
    constexpr SimTime& operator-=(SimTime o) { us -= o.us; return *this; }
};

} // namespace detmac
