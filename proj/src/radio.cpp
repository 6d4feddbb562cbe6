#include "detmac/radio.hpp"

#include "detmac/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace detmac {

namespace {

// Guards threshold comparisons against rounding in dBm differences.
constexpr double kMarginEpsilonDb = 1e-9;

double to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double to_dbm(double mw) { return 10.0 * std::log10(mw); }

} // namespace

void RadioParams::validate() const
{
    if (reference_distance_m <= 0.0)
        throw Error(Errc::ConfigViolation, "reference distance must be > 0");
    if (path_loss_exponent < 1.0)
        throw Error(Errc::ConfigViolation, "path loss exponent must be >= 1");
    if (shadowing_sigma_db < 0.0)
        throw Error(Errc::ConfigViolation, "shadowing sigma must be >= 0");
    if (capture_threshold_db <= 0.0)
        throw Error(Errc::ConfigViolation, "capture threshold must be > 0");
    if (bias_slope_db_per_us < 0.0 || bias_saturation_db < 0.0)
        throw Error(Errc::ConfigViolation, "timing bias must be non-negative");
    if (tx_power_min_dbm > tx_power_max_dbm)
        throw Error(Errc::ConfigViolation, "empty transmit power range");
    if (max_clock_error_us < 0)
        throw Error(Errc::ConfigViolation, "max clock error must be >= 0");
}

RadioEnvironment::RadioEnvironment(RadioParams params) : params_(std::move(params))
{
    params_.validate();
}

const Position& RadioEnvironment::position(NodeId node) const
{
    auto it = positions_.find(node);
    if (it == positions_.end())
        throw Error(Errc::UnknownNode, "node " + std::to_string(node) + " has no position");
    return it->second;
}

double RadioEnvironment::distance(NodeId a, NodeId b) const
{
    const Position& pa = position(a);
    const Position& pb = position(b);
    return std::hypot(pa.x - pb.x, pa.y - pb.y);
}

double path_loss_db(const RadioEnvironment& env, double distance_m)
{
    if (!(distance_m > 0.0))
        throw Error(Errc::NonPositiveDistance, "distance must be > 0");
    const auto& p = env.params();
    if (distance_m < p.reference_distance_m)
        return p.reference_loss_db;
    return p.reference_loss_db + 10.0 * p.path_loss_exponent * std::log10(distance_m / p.reference_distance_m);
}

double mean_rssi_dbm(const RadioEnvironment& env, NodeId transmitter, NodeId receiver, double tx_power_dbm)
{
    return tx_power_dbm - path_loss_db(env, env.distance(transmitter, receiver));
}

double rssi_dbm(const RadioEnvironment& env, NodeId transmitter, NodeId receiver, double tx_power_dbm,
                RngStream& rng)
{
    const double mean = mean_rssi_dbm(env, transmitter, receiver, tx_power_dbm);
    return mean + rng.normal(0.0, env.params().shadowing_sigma_db);
}

double timing_bias_db(const RadioParams& params, double advance_us)
{
    if (advance_us <= 0.0)
        return 0.0;
    return std::min(params.bias_slope_db_per_us * advance_us, params.bias_saturation_db);
}

std::string_view to_string(RxOutcome::Kind kind)
{
    switch (kind) {
    case RxOutcome::Kind::Received: return "received";
    case RxOutcome::Kind::CapturedOther: return "captured-other";
    case RxOutcome::Kind::Collision: return "collision";
    case RxOutcome::Kind::BelowSensitivity: return "below-sensitivity";
    case RxOutcome::Kind::Silent: return "silent";
    }
    return "unknown";
}

RxOutcome resolve_reception(const RadioEnvironment& env, NodeId receiver, std::optional<NodeId> expected,
                            std::span<const TransmissionAttempt> attempts, RngStream& rng)
{
    const auto& p = env.params();
    if (attempts.size() > 2)
        throw Error(Errc::MoreThanTwoAttempts, std::to_string(attempts.size()) + " overlapping attempts");
    if (attempts.empty())
        return RxOutcome{};

    auto decoded = [&](std::size_t i, double rssi) {
        const NodeId from = attempts[i].transmitter;
        const bool wanted = !expected || *expected == from;
        return RxOutcome{wanted ? RxOutcome::Kind::Received : RxOutcome::Kind::CapturedOther, from, rssi, i};
    };

    std::array<double, 2> rssi{};
    for (std::size_t i = 0; i < attempts.size(); ++i)
        rssi[i] = rssi_dbm(env, attempts[i].transmitter, receiver, attempts[i].tx_power_dbm, rng);

    if (attempts.size() == 1) {
        if (rssi[0] < p.sensitivity_dbm)
            return RxOutcome{RxOutcome::Kind::BelowSensitivity, attempts[0].transmitter, rssi[0], 0};
        if (p.noise_floor_dbm && rssi[0] - *p.noise_floor_dbm < p.capture_threshold_db - kMarginEpsilonDb)
            return RxOutcome{RxOutcome::Kind::BelowSensitivity, attempts[0].transmitter, rssi[0], 0};
        return decoded(0, rssi[0]);
    }

    if (std::max(rssi[0], rssi[1]) < p.sensitivity_dbm)
        return RxOutcome{RxOutcome::Kind::BelowSensitivity, 0, std::max(rssi[0], rssi[1]), 0};

    // Equal starts keep the first attempt as reference; the bias is then zero.
    const std::size_t early = attempts[1].start_offset_us < attempts[0].start_offset_us ? 1 : 0;
    const std::size_t late = 1 - early;
    const double advance = static_cast<double>(attempts[late].start_offset_us - attempts[early].start_offset_us);

    double interference_late = rssi[late];
    double interference_early = rssi[early];
    if (p.noise_floor_dbm) {
        interference_late = to_dbm(to_mw(rssi[late]) + to_mw(*p.noise_floor_dbm));
        interference_early = to_dbm(to_mw(rssi[early]) + to_mw(*p.noise_floor_dbm));
    }
    const double bias = timing_bias_db(p, advance);
    const double margin_early = rssi[early] - interference_late + bias;
    const double margin_late = rssi[late] - interference_early - bias;

    std::optional<std::size_t> winner;
    if (margin_early >= p.capture_threshold_db - kMarginEpsilonDb)
        winner = early;
    else if (margin_late >= p.capture_threshold_db - kMarginEpsilonDb)
        winner = late;

    if (!winner)
        return RxOutcome{RxOutcome::Kind::Collision, 0, std::max(rssi[0], rssi[1]), 0};
    if (rssi[*winner] < p.sensitivity_dbm)
        return RxOutcome{RxOutcome::Kind::BelowSensitivity, attempts[*winner].transmitter, rssi[*winner], *winner};
    return decoded(*winner, rssi[*winner]);
}

} // namespace detmac
