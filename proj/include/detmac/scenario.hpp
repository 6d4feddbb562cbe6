#pragma once

// Scenario files: a strict YAML schema covering every run-affecting
// parameter, plus the serializer used to embed the resolved config in traces.

#include "detmac/engine.hpp"
#include "detmac/harness.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace detmac {

/// Explicit starting table. Without one the engine places one GBS per star
/// coordinator and grants arrive through `pds` and `requests`.
struct SchedulePlacement {
    std::vector<std::pair<NodeId, int>> gbs; ///< (coordinator, slot)
    std::vector<Allocation> gts;
    std::vector<std::pair<Allocation, Allocation>> sgts;

    bool operator==(const SchedulePlacement&) const = default;
};

struct SweepSection {
    SweepParams params; ///< params.seed is taken from the scenario seed
    double window_lo = 0.05;
    double window_hi = 0.95;

    bool operator==(const SweepSection&) const = default;
};

struct Scenario {
    WorldSpec world; ///< world.initial stays empty; see `schedule`
    std::optional<SchedulePlacement> schedule;
    std::int64_t run_superframes = 64;
    std::optional<SweepSection> sweep;

    /// World with the placement applied as its initial table.
    WorldSpec resolved_world() const;
    SweepParams sweep_params() const;

    bool operator==(const Scenario&) const = default;
};

/// Throws Error(ParseError) naming the line and field at fault.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

std::string serialize_scenario(const Scenario& scenario);

} // namespace detmac
