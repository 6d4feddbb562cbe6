#include "detmac/rng.hpp"

namespace detmac {

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

} // namespace

RngStream rng_stream(std::uint64_t master_seed, NodeId node, std::string_view purpose)
{
    const std::uint64_t tag = fnv1a(purpose);
    const std::uint64_t a = mix(master_seed);
    const std::uint64_t b = mix(a ^ node);
    const std::uint64_t c = mix(b ^ tag);
    std::seed_seq seq{lo(a), hi(a), lo(b), hi(b), lo(c), hi(c), node};
    return RngStream(seq);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index)
{
    return mix(mix(master_seed) ^ mix(index + 0x51ed27f1ULL));
}

} // namespace detmac
