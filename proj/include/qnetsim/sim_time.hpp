#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>

namespace qnetsim
{
    /// Simulated time in integer picoseconds. The maximum value is reserved
    /// as "infinity / no event".
    class SimTime
    {
    public:
        using rep = std::uint64_t;

        constexpr SimTime() noexcept = default;
        constexpr explicit SimTime(rep ticks) noexcept : ticks_(ticks) {}

        static constexpr SimTime infinity() noexcept { return SimTime{std::numeric_limits<rep>::max()}; }
        static constexpr SimTime zero() noexcept { return SimTime{0}; }

        constexpr rep ticks() const noexcept { return ticks_; }
        constexpr bool is_infinite() const noexcept { return ticks_ == std::numeric_limits<rep>::max(); }

        constexpr auto operator<=>(const SimTime&) const noexcept = default;

        /// Saturating: anything plus infinity is infinity.
        friend constexpr SimTime operator+(SimTime a, SimTime b) noexcept
        {
            if (a.is_infinite() || b.is_infinite() || a.ticks_ > std::numeric_limits<rep>::max() - b.ticks_)
                return infinity();
            return SimTime{a.ticks_ + b.ticks_};
        }

        friend std::ostream& operator<<(std::ostream& os, SimTime t)
        {
            if (t.is_infinite())
                return os << "inf";
            return os << t.ticks_ << "ps";
        }

    private:
        rep ticks_ = 0;
    };

    inline constexpr SimTime kTimeInfinity = SimTime::infinity();

    constexpr SimTime picoseconds(std::uint64_t v) noexcept { return SimTime{v}; }
    constexpr SimTime nanoseconds(std::uint64_t v) noexcept { return SimTime{v * 1000ULL}; }
    constexpr SimTime microseconds(std::uint64_t v) noexcept { return SimTime{v * 1000'000ULL}; }
    constexpr SimTime milliseconds(std::uint64_t v) noexcept { return SimTime{v * 1000'000'000ULL}; }

    /// Fiber propagation speed used by the generators (2e8 m/s, i.e. 5000 ps per meter).
    inline constexpr double kFiberMetersPerSecond = 2.0e8;

    /// Propagation delay for a fiber of the given length, rounded half-up to whole picoseconds.
    inline SimTime propagation_delay(double distance_m, double meters_per_second = kFiberMetersPerSecond)
    {
        const long double ps = static_cast<long double>(distance_m) * 1.0e12L / static_cast<long double>(meters_per_second);
        return SimTime{static_cast<SimTime::rep>(std::floor(ps + 0.5L))};
    }
} // namespace qnetsim
