#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace qnetsim
{
    /// SplitMix64 finalizer (Steele, Lea, Flood 2014).
    constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Derives an independent stream seed from a root seed and a path of ids.
    constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept
    {
        std::uint64_t h = splitmix64(root);
        for (std::uint64_t p : path)
            h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
        return h;
    }

    /// Maps 64 random bits onto [0, 1) with 53-bit resolution.
    constexpr double to_unit_interval(std::uint64_t bits) noexcept
    {
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    /// Small counter-based generator. Satisfies UniformRandomBitGenerator.
    class SplitMix64
    {
    public:
        using result_type = std::uint64_t;

        constexpr explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

        constexpr result_type operator()() noexcept
        {
            state_ += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = state_;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            return z ^ (z >> 31);
        }

        constexpr double uniform() noexcept { return to_unit_interval((*this)()); }

        /// Uniform integer in [0, bound) by multiply-shift.
        constexpr std::uint64_t below(std::uint64_t bound) noexcept
        {
            return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
        }

    private:
        std::uint64_t state_;
    };
} // namespace qnetsim
