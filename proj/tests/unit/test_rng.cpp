#include "detmac/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace detmac;

TEST_SUITE("rng") {

TEST_CASE("same triple, same sequence")
{
    auto a = rng_stream(42, 7, "rx");
    auto b = rng_stream(42, 7, "rx");
    for (int i = 0; i < 1000; ++i)
        CHECK(a.next() == b.next());
}

TEST_CASE("different purpose or node, different sequence")
{
    auto a = rng_stream(42, 7, "rx");
    auto b = rng_stream(42, 7, "csma");
    auto c = rng_stream(42, 8, "rx");
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        same_b += x == b.next();
        same_c += x == c.next();
    }
    CHECK(same_b == 0);
    CHECK(same_c == 0);
}

TEST_CASE("uniform draws have the right mean")
{
    auto r = rng_stream(1, 0, "traffic");
    constexpr int kDraws = 100000;
    double sum = 0.0;
    for (int i = 0; i < kDraws; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    const double mean = sum / kDraws;
    const double sigma = std::sqrt(1.0 / 12.0 / kDraws);
    CHECK(std::abs(mean - 0.5) < 3.0 * sigma);
}

TEST_CASE("derived seeds differ per index")
{
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 5) == derive_seed(1, 5));
    CHECK(derive_seed(1, 5) != derive_seed(2, 5));
}

} // TEST_SUITE
