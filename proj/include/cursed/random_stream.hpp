#pragma once

#include <cstdint>
#include <limits>

namespace cursed {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace detail

/// Counter-based random stream addressed by (seed, stream_index).
///
/// Every sample in an experiment owns one stream_index, so draws never depend
/// on how work is split across threads. The generator is xoshiro256** seeded
/// through splitmix64 from the pair.
class RandomStream {
public:
    using result_type = std::uint64_t;

    constexpr RandomStream(std::uint64_t seed, std::uint64_t stream_index = 0) noexcept
        : seed_(seed), stream_index_(stream_index) {
        std::uint64_t key = detail::splitmix64(seed ^ detail::splitmix64(stream_index + 0x632BE59BD9B4E019ull));
        for (auto& word : state_) {
            key = detail::splitmix64(key);
            word = key;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    constexpr double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    /// Sibling stream for a nested purpose (e.g. a per-agent substream).
    [[nodiscard]] constexpr RandomStream substream(std::uint64_t index) const noexcept {
        return RandomStream(detail::splitmix64(seed_ ^ 0xD1B54A32D192ED03ull) ^ stream_index_, index);
    }

    [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] constexpr std::uint64_t stream_index() const noexcept { return stream_index_; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t stream_index_;
    std::uint64_t state_[4]{};
};

}  // namespace cursed
