#pragma once

#include "qnetsim/error.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

namespace qnetsim::wire
{
    /// Little-endian payload builder.
    class Writer
    {
    public:
        void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
        void u32(std::uint32_t v) { put(v, 4); }
        void u64(std::uint64_t v) { put(v, 8); }
        void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

        const std::vector<std::byte>& bytes() const noexcept { return buf_; }
        std::vector<std::byte> take() noexcept { return std::move(buf_); }

    private:
        void put(std::uint64_t v, int n)
        {
            for (int i = 0; i < n; ++i)
                buf_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xff));
        }

        std::vector<std::byte> buf_;
    };

    /// Bounds-checked little-endian reader; truncated input is a transport failure.
    class Reader
    {
    public:
        explicit Reader(std::span<const std::byte> data) noexcept : data_(data) {}

        std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
        std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
        std::uint64_t u64() { return get(8); }
        double f64() { return std::bit_cast<double>(u64()); }

        bool done() const noexcept { return pos_ == data_.size(); }
        std::size_t remaining() const noexcept { return data_.size() - pos_; }

    private:
        std::uint64_t get(std::size_t n)
        {
            if (data_.size() - pos_ < n)
                throw Error(ErrorCode::TransportFailure, "truncated frame payload");
            std::uint64_t v = 0;
            for (std::size_t i = 0; i < n; ++i)
                v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(data_[pos_ + i])) << (8 * i);
            pos_ += n;
            return v;
        }

        std::span<const std::byte> data_;
        std::size_t pos_ = 0;
    };

    /// One length-prefixed frame: u32 length (opcode byte + payload), u8 opcode, payload.
    struct Frame
    {
        std::uint8_t opcode = 0;
        std::vector<std::byte> payload;
    };

    inline std::vector<std::byte> encode_frame(std::uint8_t opcode, std::span<const std::byte> payload)
    {
        Writer w;
        w.u32(static_cast<std::uint32_t>(payload.size() + 1));
        w.u8(opcode);
        std::vector<std::byte> out = w.take();
        out.insert(out.end(), payload.begin(), payload.end());
        return out;
    }
} // namespace qnetsim::wire
