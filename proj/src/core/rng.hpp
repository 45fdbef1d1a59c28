#pragma once

#include <cstdint>
#include <random>

namespace dcfr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Independent engine per (master seed, replicate, stream); the same key always gives the same draws.
inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream) {
    std::uint64_t s = master;
    std::uint64_t key = splitmix64(s);
    s = key ^ (replicate * 0xD1B54A32D192ED03ULL);
    key = splitmix64(s);
    s = key ^ (stream * 0x8CB92BA72F3D8DD7ULL);
    key = splitmix64(s);
    std::seed_seq seq{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return std::mt19937_64(seq);
}

} // namespace dcfr
