// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace scaffold {

/// SplitMix64 output finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-keyed random stream. The initial state is a hash of the
/// (seed, stream id, counter) triple, so every (agent, step) pair owns an
/// independent sequence and draws never depend on evaluation order.
class KeyedStream {
public:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

    constexpr KeyedStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept
        : state_(mix64(mix64(mix64(seed + kGolden) ^ (stream + 0x632be59bd9b4e019ULL)) ^
                       (counter * kGolden + 0x2545f4914f6cdd1dULL))) {}

    constexpr std::uint64_t next_u64() noexcept {
        state_ += kGolden;
        return mix64(state_);
    }

    /// Uniform in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    constexpr double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // std::uniform_random_bit_generator, so <random> distributions can draw from it.
    using result_type = std::uint64_t;
    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }
    constexpr result_type operator()() noexcept { return next_u64(); }

private:
    std::uint64_t state_;
};

} // namespace scaffold
