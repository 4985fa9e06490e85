#pragma once

#include <cstdint>
#include <span>

namespace volcal {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Combines a seed with a stream index into a new, well-mixed seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

/// xoshiro256** generator. Substreams are derived from (seed, index) so that
/// the draws of item i never depend on how work is scheduled.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    static Rng substream(std::uint64_t seed, std::uint64_t index) noexcept {
        return Rng(mix_seed(seed, index));
    }

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept;

    void fill_normal(std::span<double> out) noexcept;

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::uint64_t s_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace volcal
