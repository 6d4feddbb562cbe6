#include "detmac/csma.hpp"
#include "detmac/error.hpp"

#include <doctest.h>

#include <vector>

using namespace detmac;

TEST_SUITE("csma") {

namespace {
constexpr std::int64_t kPeriod = kBackoffPeriodSymbols * kMicrosPerSymbol;
const CapWindow kCap{SimTime::micros(960), SimTime::micros(960 * 16)};
} // namespace

TEST_CASE("sole contender on an idle channel sends within the first window")
{
    const CsmaParams params;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        auto rng = rng_stream(seed, 1, "csma");
        const auto r = csma_ca_attempt(params, SimTime::symbols(50), kCap, SimTime::micros(20),
                                       [](SimTime) { return false; }, rng);
        REQUIRE(r.tx_start);
        CHECK(r.backoffs == 0);
        // Backoff of at most 2^minBE - 1 periods, then two clear assessments.
        CHECK((*r.tx_start - kCap.start).us <= ((1 << params.min_be) - 1 + 2) * kPeriod);
        CHECK((*r.tx_start - kCap.start).us % kPeriod == 0);
    }
}

TEST_CASE("permanently busy channel ends in access failure")
{
    auto rng = rng_stream(1, 1, "csma");
    const CapWindow long_cap{SimTime{}, SimTime::micros(1'000'000)};
    const auto r = csma_ca_attempt(CsmaParams{}, SimTime::symbols(50), long_cap, SimTime{},
                                   [](SimTime) { return true; }, rng);
    CHECK(!r.tx_start);
    CHECK(r.channel_access_failure);
    CHECK(r.backoffs == CsmaParams{}.max_backoffs + 1);
}

TEST_CASE("a frame longer than the window is rejected")
{
    auto rng = rng_stream(1, 1, "csma");
    CHECK_THROWS_AS(csma_ca_attempt(CsmaParams{}, SimTime::micros(20000), kCap, SimTime{},
                                    [](SimTime) { return false; }, rng),
                    Error);
}

TEST_CASE("ten saturated contenders collide")
{
    // Each contender always has a frame; a transmission occupies the channel
    // for `kLen` backoff periods starting at the boundary after Transmit.
    constexpr int kContenders = 10;
    constexpr int kBoundaries = 45;
    constexpr int kLen = 3;
    int collisions = 0, sent = 0, failures = 0;
    std::vector<RngStream> rngs;
    for (int i = 0; i < kContenders; ++i)
        rngs.push_back(rng_stream(7, static_cast<NodeId>(i), "csma"));

    for (int cap = 0; cap < 1000; ++cap) {
        std::vector<CsmaCa> state(kContenders, CsmaCa(CsmaParams{}));
        std::vector<int> busy_until(kBoundaries + kLen + 2, 0);
        std::vector<std::vector<int>> starts(kBoundaries + 2);
        std::vector<bool> active(kContenders, true);
        for (int b = 0; b < kBoundaries; ++b) {
            for (int n = 0; n < kContenders; ++n) {
                if (!active[n])
                    continue;
                switch (state[n].on_boundary(busy_until[b] > 0, rngs[n])) {
                case CsmaCa::Step::Wait: break;
                case CsmaCa::Step::Failure:
                    ++failures;
                    active[n] = false;
                    break;
                case CsmaCa::Step::Transmit:
                    starts[b + 1].push_back(n);
                    active[n] = false;
                    break;
                }
            }
            for (int n : starts[b + 1])
                for (int k = b + 1; k < b + 1 + kLen; ++k)
                    ++busy_until[k];
        }
        for (int b = 0; b < kBoundaries + 2; ++b) {
            sent += static_cast<int>(starts[b].size());
            bool overlap = starts[b].size() > 1;
            for (int k = std::max(0, b - kLen + 1); k < b && !overlap; ++k)
                overlap = !starts[k].empty() && !starts[b].empty();
            if (overlap)
                ++collisions;
        }
    }
    CHECK(sent > 0);
    CHECK(collisions > 0);
    MESSAGE("sent=" << sent << " collisions=" << collisions << " failures=" << failures);
}

} // TEST_SUITE
