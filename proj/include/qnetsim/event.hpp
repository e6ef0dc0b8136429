#pragma once

#include "qnetsim/sim_time.hpp"

#include <cstdint>
#include <limits>
#include <variant>

namespace qnetsim
{
    using EntityId = std::uint32_t;
    using WorkerId = std::uint32_t;

    enum class EventKind : std::uint8_t
    {
        PhotonArrival = 0,
        ClassicalMessage = 1,
        ProtocolTimer = 2,
        QsmBatchFlush = 3,
    };

    inline constexpr std::size_t kEventKindCount = 4;

    /// A photon reaching the receiving end of one hop's quantum channel.
    struct PhotonArrival
    {
        std::uint32_t session = 0;
        std::uint32_t hop = 0;
        std::uint64_t photon = 0;
        SimTime emitted_at{};
        bool operator==(const PhotonArrival&) const = default;
    };

    enum class ClassicalType : std::uint8_t
    {
        FrameEnd = 0,  // sender -> receiver: basis announcement for a finished frame
        SiftReply = 1, // receiver -> sender: sifting result for that frame
    };

    struct ClassicalMessage
    {
        std::uint32_t session = 0;
        std::uint32_t hop = 0;
        std::uint64_t frame = 0;
        ClassicalType type = ClassicalType::FrameEnd;
        bool operator==(const ClassicalMessage&) const = default;
    };

    /// Source-side frame emission timer.
    struct ProtocolTimer
    {
        std::uint32_t session = 0;
        std::uint64_t frame = 0;
        bool operator==(const ProtocolTimer&) const = default;
    };

    struct QsmBatchFlush
    {
        std::uint64_t epoch = 0;
        bool operator==(const QsmBatchFlush&) const = default;
    };

    using EventPayload = std::variant<PhotonArrival, ClassicalMessage, ProtocolTimer, QsmBatchFlush>;

    inline constexpr std::uint64_t kUnsetSeq = std::numeric_limits<std::uint64_t>::max();

    struct Event
    {
        SimTime time{};
        std::uint64_t seq = kUnsetSeq;
        EntityId target = 0;
        EventPayload payload{};

        EventKind kind() const noexcept { return static_cast<EventKind>(payload.index()); }
        bool operator==(const Event&) const = default;
    };

    /// Sequence numbers below this bound are issued by a timeline's own counter;
    /// the space above it is partitioned per originating entity.
    inline constexpr int kCausalSeqShift = 40;
    inline constexpr std::uint64_t kCausalCounterMask = (1ULL << kCausalSeqShift) - 1;

    /// Ordering key that depends only on who created the event and how many
    /// events that entity had created before, never on which worker ran it.
    constexpr std::uint64_t make_causal_seq(EntityId origin, std::uint64_t counter) noexcept
    {
        return ((static_cast<std::uint64_t>(origin) + 1) << kCausalSeqShift) | (counter & kCausalCounterMask);
    }

    constexpr bool is_quantum_channel_event(EventKind k) noexcept { return k == EventKind::PhotonArrival; }

    constexpr const char* to_string(EventKind k) noexcept
    {
        switch (k)
        {
        case EventKind::PhotonArrival: return "photon_arrival";
        case EventKind::ClassicalMessage: return "classical_message";
        case EventKind::ProtocolTimer: return "protocol_timer";
        case EventKind::QsmBatchFlush: return "qsm_batch_flush";
        }
        return "unknown";
    }
} // namespace qnetsim
