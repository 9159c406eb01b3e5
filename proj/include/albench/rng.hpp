#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace albench {

// SplitMix64 step. Used to seed xoshiro and to derive sub-stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, so string tags can name random streams.
constexpr std::uint64_t tag_hash(std::string_view tag) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// stream_seed = mix(master_seed, tag, ids...). Every random stream in the
// library is obtained this way so results never depend on call order or
// thread schedule.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) noexcept
{
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s = a ^ tag;
    return splitmix64(s);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) noexcept
{
    return derive_seed(master, tag_hash(tag));
}

template <typename... Ids>
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t id,
                                    Ids... rest) noexcept
{
    std::uint64_t s = derive_seed(derive_seed(master, tag), id);
    ((s = derive_seed(s, static_cast<std::uint64_t>(rest))), ...);
    return s;
}

// xoshiro256** 1.0 (Blackman & Vigna), seeded through SplitMix64.
// Satisfies UniformRandomBitGenerator, but the helpers below are the
// only sampling routines the library uses, so output is fixed across
// standard library implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept
    {
        std::uint64_t sm = seed;
        for (auto& word : s_)
            word = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Lemire's multiply-shift with rejection.
    std::uint64_t below(std::uint64_t bound) noexcept;

    // Standard normal via Box-Muller; the second variate is cached.
    double normal() noexcept;

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

// Moves a uniform random sample of `count` elements (without replacement)
// to the front of `items`, in draw order. Fisher-Yates prefix.
template <typename T>
void shuffle_prefix(std::span<T> items, std::size_t count, Rng& rng)
{
    const std::size_t n = items.size();
    if (count > n)
        count = n;
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        using std::swap;
        swap(items[i], items[j]);
    }
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng)
{
    shuffle_prefix(std::span<T>(items), items.size() > 0 ? items.size() - 1 : 0, rng);
}

// floor(x + 0.5): the single rounding rule for counts derived from fractions.
std::size_t round_half_up(double x) noexcept;

} // namespace albench
