#include "detmac/error.hpp"
#include "detmac/radio.hpp"

#include "../support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace detmac;

namespace {

// Receiver 0 at the origin, transmitters 1 and 2 at 1 m (40 dB loss).
RadioEnvironment bench(double sigma)
{
    RadioParams p;
    p.shadowing_sigma_db = sigma;
    RadioEnvironment env(p);
    env.place(0, {0, 0});
    env.place(1, {1, 0});
    env.place(2, {0, 1});
    return env;
}

RxOutcome two(const RadioEnvironment& env, double p1, double p2, std::int64_t off1, std::int64_t off2,
              std::optional<NodeId> expected, RngStream& rng)
{
    std::vector<TransmissionAttempt> a{TransmissionAttempt{1, Frame{}, p1, off1}, TransmissionAttempt{2, Frame{}, p2, off2}};
    return resolve_reception(env, 0, expected, a, rng);
}

int as_sign(const RxOutcome& o)
{
    if (!o.decoded())
        return 0;
    return o.from == 1 ? 1 : -1;
}

} // namespace

TEST_SUITE("radio") {

TEST_CASE("path loss")
{
    RadioEnvironment env = bench(0);
    CHECK(path_loss_db(env, 1.0) == doctest::Approx(40.0));
    CHECK(path_loss_db(env, 10.0) == doctest::Approx(60.0));
    CHECK_THROWS_AS(path_loss_db(env, 0.0), Error);
}

TEST_CASE("rssi without shadowing")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    CHECK(rssi_dbm(env, 1, 0, 0.0, rng) == doctest::Approx(-40.0));
    CHECK(rssi_dbm(env, 1, 0, 3.6, rng) == doctest::Approx(-36.4));
}

TEST_CASE("shadowed rssi is reproducible")
{
    RadioEnvironment env = bench(2.0);
    auto a = rng_stream(9, 0, "rx");
    auto b = rng_stream(9, 0, "rx");
    for (int i = 0; i < 100; ++i)
        CHECK(rssi_dbm(env, 1, 0, 0.0, a) == rssi_dbm(env, 1, 0, 0.0, b));
}

TEST_CASE("capture spot cases")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    CHECK(two(env, 0, 0, 0, 0, 1, rng).kind == RxOutcome::Kind::Collision);
    CHECK(two(env, 0, -15, 0, 0, 1, rng).kind == RxOutcome::Kind::Received);
    CHECK(two(env, -15, 0, 0, 0, 1, rng).kind == RxOutcome::Kind::CapturedOther);
    std::vector<TransmissionAttempt> three(3, TransmissionAttempt{1, Frame{}, 0.0, 0});
    three[1].transmitter = 2;
    CHECK_THROWS_AS(resolve_reception(env, 0, 1, three, rng), Error);
}

TEST_CASE("capture rule matches the reference over a 0.1 dB grid")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    for (int advance : {0, 1, 3, 7, -2}) {
        for (int k = -150; k <= 150; ++k) {
            const double delta = k * 0.1;
            const RxOutcome o = two(env, -5.0 + delta, -5.0, advance < 0 ? -advance : 0, advance > 0 ? advance : 0,
                                    std::nullopt, rng);
            CHECK_MESSAGE(as_sign(o) == oracle::capture(delta, advance), "delta=" << delta << " advance=" << advance);
        }
    }
}

TEST_CASE("collision region is the open window")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    CHECK(two(env, 5.0, 0.0, 0, 0, 1, rng).kind == RxOutcome::Kind::Received);
    CHECK(two(env, 0.0, 5.0, 0, 0, 1, rng).kind == RxOutcome::Kind::CapturedOther);
    CHECK(two(env, 4.9, 0.0, 0, 0, 1, rng).kind == RxOutcome::Kind::Collision);
    CHECK(two(env, 0.0, 4.9, 0, 0, 1, rng).kind == RxOutcome::Kind::Collision);
}

TEST_CASE("swapping attempts swaps the decoded frame")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    for (int k = -100; k <= 100; ++k) {
        const double d = k * 0.2;
        std::vector<TransmissionAttempt> ab{TransmissionAttempt{1, Frame{}, d, 0}, TransmissionAttempt{2, Frame{}, 0.0, 0}};
        std::vector<TransmissionAttempt> ba{ab[1], ab[0]};
        const RxOutcome x = resolve_reception(env, 0, 1, ab, rng);
        const RxOutcome y = resolve_reception(env, 0, 1, ba, rng);
        CHECK(x.kind == y.kind);
        CHECK(x.from == y.from);
    }
}

TEST_CASE("timing advance never hurts the earlier node")
{
    RadioEnvironment env = bench(0);
    auto rng = rng_stream(1, 0, "rx");
    for (int k = -60; k <= 60; ++k) {
        const double delta = k * 0.1;
        int prev = -2;
        for (int adv = 0; adv <= 8; ++adv) {
            const int s = as_sign(two(env, delta, 0.0, 0, adv, std::nullopt, rng));
            CHECK(s >= prev);
            prev = s;
        }
    }
    CHECK(timing_bias_db(env.params(), 3.0) == doctest::Approx(3.0));
    CHECK(timing_bias_db(env.params(), 30.0) == doctest::Approx(5.0));
    CHECK(timing_bias_db(env.params(), -1.0) == 0.0);
}

TEST_CASE("shadowed success rate is monotone in the mean delta")
{
    RadioEnvironment env = bench(2.0);
    auto rng = rng_stream(3, 0, "rx");
    constexpr int kTrials = 10000;
    double prev = -1.0;
    for (int d = -12; d <= 12; d += 2) {
        int ok = 0;
        for (int i = 0; i < kTrials; ++i)
            ok += two(env, d, 0.0, 0, 0, 1, rng).kind == RxOutcome::Kind::Received;
        const double rate = static_cast<double>(ok) / kTrials;
        // Three binomial standard deviations of slack.
        CHECK(rate >= prev - 3.0 * std::sqrt(0.25 / kTrials) * std::sqrt(2.0));
        prev = rate;
    }
    CHECK(prev > 0.99);
}

TEST_CASE("below sensitivity")
{
    RadioEnvironment env = bench(0);
    env.place(3, {5000, 0});
    auto rng = rng_stream(1, 0, "rx");
    std::vector<TransmissionAttempt> one{TransmissionAttempt{3, Frame{}, 0.0, 0}};
    CHECK(resolve_reception(env, 0, 3, one, rng).kind == RxOutcome::Kind::BelowSensitivity);
    CHECK(resolve_reception(env, 0, 3, {}, rng).kind == RxOutcome::Kind::Silent);
}

} // TEST_SUITE
