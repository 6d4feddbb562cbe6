#pragma once

// Physical medium: log-distance path loss, per-frame log-normal shadowing,
// sensitivity and a two-frame capture resolver with a timing-advance bias.

#include "detmac/frame.hpp"
#include "detmac/rng.hpp"
#include "detmac/types.hpp"

#include <map>
#include <optional>
#include <span>
#include <string_view>

namespace detmac {

struct Position {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Position&) const = default;
};

struct RadioParams {
    double reference_distance_m = 1.0;
    double reference_loss_db = 40.0;
    double path_loss_exponent = 2.0;
    double shadowing_sigma_db = 2.0;
    std::optional<double> noise_floor_dbm; ///< none: anechoic, no thermal noise
    double sensitivity_dbm = -92.0;
    double capture_threshold_db = 5.0;
    double bias_slope_db_per_us = 1.0;
    double bias_saturation_db = 5.0;
    double tx_power_min_dbm = -16.0;
    double tx_power_max_dbm = 3.6;
    std::int64_t max_clock_error_us = 10;

    /// Throws Error(ConfigViolation) on out-of-range parameters.
    void validate() const;

    bool operator==(const RadioParams&) const = default;
};

class RadioEnvironment {
public:
    RadioEnvironment() = default;
    explicit RadioEnvironment(RadioParams params);

    const RadioParams& params() const { return params_; }
    RadioParams& params() { return params_; }

    void place(NodeId node, Position where) { positions_[node] = where; }
    bool has(NodeId node) const { return positions_.contains(node); }
    const Position& position(NodeId node) const;
    const std::map<NodeId, Position>& positions() const { return positions_; }

    double distance(NodeId a, NodeId b) const;

private:
    RadioParams params_;
    std::map<NodeId, Position> positions_;
};

double path_loss_db(const RadioEnvironment& env, double distance_m);

/// RSSI without shadowing.
double mean_rssi_dbm(const RadioEnvironment& env, NodeId transmitter, NodeId receiver, double tx_power_dbm);

/// RSSI with one shadowing draw from `rng`.
double rssi_dbm(const RadioEnvironment& env, NodeId transmitter, NodeId receiver, double tx_power_dbm,
                RngStream& rng);

/// Capture bonus (dB) of a frame that started `advance_us` before its competitor.
double timing_bias_db(const RadioParams& params, double advance_us);

struct TransmissionAttempt {
    NodeId transmitter = 0;
    Frame frame;
    double tx_power_dbm = 0.0;
    std::int64_t start_offset_us = 0; ///< relative to the nominal slot start
};

struct RxOutcome {
    enum class Kind { Received, CapturedOther, Collision, BelowSensitivity, Silent };
    Kind kind = Kind::Silent;
    NodeId from = 0;        ///< decoded transmitter for Received / CapturedOther
    double rssi_dbm = 0.0;  ///< RSSI of the decoded frame
    std::size_t index = 0;  ///< index of the decoded attempt

    bool decoded() const { return kind == Kind::Received || kind == Kind::CapturedOther; }
};

std::string_view to_string(RxOutcome::Kind kind);

/// Resolves what `receiver` decodes from up to two overlapping attempts.
/// A decoded frame counts as Received when it comes from `expected`
/// (or when no sender is expected), otherwise CapturedOther.
RxOutcome resolve_reception(const RadioEnvironment& env, NodeId receiver, std::optional<NodeId> expected,
                            std::span<const TransmissionAttempt> attempts, RngStream& rng);

} // namespace detmac
