#pragma once

#include <cstdint>
#include <random>

namespace ctrkit {

// splitmix64 step; used to derive independent stream seeds from one root seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag) {
    return mix_seed(root ^ mix_seed(tag));
}

inline std::mt19937_64 make_engine(std::uint64_t root, std::uint64_t tag) {
    return std::mt19937_64(derive_seed(root, tag));
}

}  // namespace ctrkit
