#pragma once

// Counter-based SplitMix64 generator.
//
// The k-th output (k = 1, 2, ...) of the stream with seed s is mix(s + k * gamma),
// where gamma = 0x9e3779b97f4a7c15 and mix is the 64-bit finalizer of Steele, Lea and
// Flood (2014). The algorithm identity is recorded in every serialized ensemble; any
// change here is a file-format break.

#include <cstdint>
#include <limits>
#include <string_view>

namespace reslab {

class splitmix64 {
public:
    using result_type = std::uint64_t;

    static constexpr std::string_view algorithm = "splitmix64";
    static constexpr std::uint64_t gamma = 0x9e3779b97f4a7c15ULL;

    explicit constexpr splitmix64(std::uint64_t seed) noexcept : state_{seed} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    constexpr result_type operator()() noexcept
    {
        state_ += gamma;
        return mix(state_);
    }

    /// Uniform on the open interval (0, 1), on a lattice symmetric about 1/2.
    constexpr double uniform_open01() noexcept
    {
        return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
    }

    /// Lattice point (2k + 1 - 2^52) / 2^52 for k < 2^52; exact, and odd under k -> 2^52 - 1 - k.
    static constexpr double symmetric_unit(std::uint64_t k) noexcept
    {
        return static_cast<double>(static_cast<std::int64_t>(2 * k + 1) - (std::int64_t{1} << 52)) * 0x1.0p-52;
    }

    /// Uniform on [0, 1).
    constexpr double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (-r, r), exactly symmetric about zero.
    constexpr double symmetric_uniform(double r) noexcept { return r * symmetric_unit((*this)() >> 12); }

    /// Uniform on (lo, hi).
    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform_open01(); }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

/// Derive an independent stream seed from a base seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept
{
    return splitmix64::mix(base ^ splitmix64::mix(stream + splitmix64::gamma));
}

/// 64-bit FNV-1a digest. Stable across platforms, used for config hashes.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace reslab
