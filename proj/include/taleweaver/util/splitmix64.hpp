#pragma once

#include <cstdint>

namespace taleweaver {

// SplitMix64 generator. The auto-director and `run --seed` both draw choice
// indices from it so a seed reproduces the same path everywhere.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next()
    {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    // Uniform-ish pick in [0, n). n must be > 0.
    constexpr std::uint64_t pick(std::uint64_t n) { return next() % n; }

private:
    std::uint64_t state_;
};

}  // namespace taleweaver
