#pragma once

#include "qnetsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace qnetsim::qsm
{
    using MemoryKey = std::uint64_t;
    using Amplitude = std::complex<double>;

    inline constexpr std::size_t kMaxQubitsPerState = 10;
    inline constexpr double kNormTolerance = 1e-9;

    /// Dense amplitude vector over an ordered set of memory keys. keys[0] is
    /// the most significant bit of the amplitude index.
    struct QuantumState
    {
        std::vector<MemoryKey> keys;
        std::vector<Amplitude> amplitudes;

        bool operator==(const QuantumState&) const = default;
    };

    inline double norm_squared(std::span<const Amplitude> amps)
    {
        double s = 0.0;
        for (const auto& a : amps)
            s += std::norm(a);
        return s;
    }

    /// Validates and brings a state into canonical form (strictly increasing keys).
    inline QuantumState make_state(std::vector<MemoryKey> keys, std::vector<Amplitude> amplitudes)
    {
        const std::size_t n = keys.size();
        if (n == 0)
            throw Error(ErrorCode::InvalidRequest, "state needs at least one key");
        if (n > kMaxQubitsPerState)
            throw Error(ErrorCode::StateTooLarge, std::to_string(n) + " keys exceeds the per-state cap of " +
                                                      std::to_string(kMaxQubitsPerState));
        if (amplitudes.size() != (std::size_t{1} << n))
            throw Error(ErrorCode::InvalidRequest, "expected " + std::to_string(std::size_t{1} << n) +
                                                       " amplitudes, got " + std::to_string(amplitudes.size()));
        const double norm = norm_squared(amplitudes);
        if (!(std::abs(norm - 1.0) <= kNormTolerance))
            throw Error(ErrorCode::NotNormalized, "squared norm is " + std::to_string(norm));

        if (std::is_sorted(keys.begin(), keys.end()) && std::adjacent_find(keys.begin(), keys.end()) == keys.end())
            return QuantumState{std::move(keys), std::move(amplitudes)};

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
        for (std::size_t i = 1; i < n; ++i)
            if (keys[order[i]] == keys[order[i - 1]])
                throw Error(ErrorCode::InvalidRequest, "duplicate key " + std::to_string(keys[order[i]]));

        // new_pos[q]: where the qubit listed at position q ends up.
        std::vector<std::size_t> new_pos(n);
        for (std::size_t i = 0; i < n; ++i)
            new_pos[order[i]] = i;

        std::vector<Amplitude> permuted(amplitudes.size());
        for (std::size_t idx = 0; idx < amplitudes.size(); ++idx)
        {
            std::size_t out = 0;
            for (std::size_t q = 0; q < n; ++q)
                if ((idx >> (n - 1 - q)) & 1U)
                    out |= std::size_t{1} << (n - 1 - new_pos[q]);
            permuted[out] = amplitudes[idx];
        }
        std::vector<MemoryKey> sorted(n);
        for (std::size_t i = 0; i < n; ++i)
            sorted[i] = keys[order[i]];
        return QuantumState{std::move(sorted), std::move(permuted)};
    }

    inline std::size_t key_position(const QuantumState& s, MemoryKey key)
    {
        const auto it = std::lower_bound(s.keys.begin(), s.keys.end(), key);
        if (it == s.keys.end() || *it != key)
            throw Error(ErrorCode::KeyNotFound, "key " + std::to_string(key) + " not in state");
        return static_cast<std::size_t>(it - s.keys.begin());
    }

    /// Probability that measuring `key` yields 0.
    inline double probability_zero(const QuantumState& s, MemoryKey key)
    {
        const std::size_t n = s.keys.size();
        const std::size_t bit = n - 1 - key_position(s, key);
        double p0 = 0.0, p1 = 0.0;
        for (std::size_t idx = 0; idx < s.amplitudes.size(); ++idx)
            ((idx >> bit) & 1U ? p1 : p0) += std::norm(s.amplitudes[idx]);
        return p0 / (p0 + p1);
    }

    struct Collapse
    {
        int outcome = 0;
        QuantumState remaining; // empty keys when the measured qubit was alone
    };

    /// Projective computational-basis measurement driven by a caller-supplied
    /// draw in [0, 1): outcome 0 iff draw < P(0). The measured key is removed
    /// and the rest renormalized.
    inline Collapse measure(const QuantumState& s, MemoryKey key, double draw)
    {
        if (!(draw >= 0.0 && draw < 1.0))
            throw Error(ErrorCode::InvalidRequest, "rng_draw must lie in [0, 1)");
        const std::size_t n = s.keys.size();
        const std::size_t pos = key_position(s, key);
        const std::size_t bit = n - 1 - pos;

        double p0 = 0.0, p1 = 0.0;
        for (std::size_t idx = 0; idx < s.amplitudes.size(); ++idx)
            ((idx >> bit) & 1U ? p1 : p0) += std::norm(s.amplitudes[idx]);
        const int outcome = (p1 == 0.0 || draw < p0 / (p0 + p1)) ? 0 : 1;
        const double scale = 1.0 / std::sqrt(outcome == 0 ? p0 : p1);

        Collapse result;
        result.outcome = outcome;
        if (n == 1)
            return result;
        result.remaining.keys.reserve(n - 1);
        for (std::size_t q = 0; q < n; ++q)
            if (q != pos)
                result.remaining.keys.push_back(s.keys[q]);
        result.remaining.amplitudes.reserve(s.amplitudes.size() / 2);
        const std::size_t low_mask = (std::size_t{1} << bit) - 1;
        for (std::size_t rest = 0; rest < s.amplitudes.size() / 2; ++rest)
        {
            const std::size_t idx = ((rest & ~low_mask) << 1) | (static_cast<std::size_t>(outcome) << bit) | (rest & low_mask);
            result.remaining.amplitudes.push_back(s.amplitudes[idx] * scale);
        }
        return result;
    }
} // namespace qnetsim::qsm
