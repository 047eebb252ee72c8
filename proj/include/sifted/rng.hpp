#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sifted {

// Stable 64-bit stream id from a base seed and a label. Every random draw in
// the library comes from an rng seeded this way, so component initialisation
// does not depend on which other components exist.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a offset basis
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

inline std::mt19937_64 seeded_rng(std::uint64_t seed, std::string_view label) {
    return std::mt19937_64(mix_seed(seed, label));
}

}  // namespace sifted
