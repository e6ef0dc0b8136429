#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace qnetsim
{
    /// FNV-1a, 64-bit. Used for report digests, not for security.
    class Fnv1a64
    {
    public:
        Fnv1a64& bytes(const void* data, std::size_t n) noexcept
        {
            const auto* p = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i)
            {
                h_ ^= p[i];
                h_ *= 0x100000001b3ULL;
            }
            return *this;
        }

        Fnv1a64& u64(std::uint64_t v) noexcept
        {
            unsigned char b[8];
            for (int i = 0; i < 8; ++i)
                b[i] = static_cast<unsigned char>(v >> (8 * i));
            return bytes(b, 8);
        }

        Fnv1a64& str(std::string_view s) noexcept
        {
            u64(s.size());
            return bytes(s.data(), s.size());
        }

        std::uint64_t value() const noexcept { return h_; }

    private:
        std::uint64_t h_ = 0xcbf29ce484222325ULL;
    };

    inline std::string to_hex(std::uint64_t v)
    {
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
        return buf;
    }
} // namespace qnetsim
