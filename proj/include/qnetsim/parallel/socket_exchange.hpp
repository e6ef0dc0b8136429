#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/parallel/exchange.hpp"
#include "qnetsim/socket.hpp"
#include "qnetsim/wire.hpp"

#include <map>
#include <string>
#include <vector>

namespace qnetsim::par
{
    // Worker <-> hub frames. Every collective is one frame from each worker
    // to the hub, answered by the hub once all workers have sent theirs.
    enum class SyncOpcode : std::uint8_t
    {
        HorizonPropose = 1, // rank u32, next_time u64, abort u8
        HorizonCommit = 2,  // min_next u64, abort u8
        EventBatch = 3,     // sender u32, count u32, events
        Done = 4,
        Barrier = 5,
        BarrierRelease = 6,
    };

    inline void encode_event(wire::Writer& w, const Event& e)
    {
        w.u64(e.time.ticks());
        w.u64(e.seq);
        w.u32(e.target);
        w.u8(static_cast<std::uint8_t>(e.kind()));
        std::visit(
            [&](const auto& p) {
                using T = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<T, PhotonArrival>)
                {
                    w.u32(p.session);
                    w.u32(p.hop);
                    w.u64(p.photon);
                    w.u64(p.emitted_at.ticks());
                }
                else if constexpr (std::is_same_v<T, ClassicalMessage>)
                {
                    w.u32(p.session);
                    w.u32(p.hop);
                    w.u64(p.frame);
                    w.u8(static_cast<std::uint8_t>(p.type));
                }
                else if constexpr (std::is_same_v<T, ProtocolTimer>)
                {
                    w.u32(p.session);
                    w.u64(p.frame);
                }
                else
                    w.u64(p.epoch);
            },
            e.payload);
    }

    inline Event decode_event(wire::Reader& r)
    {
        Event e;
        e.time = SimTime{r.u64()};
        e.seq = r.u64();
        e.target = r.u32();
        const auto kind = static_cast<EventKind>(r.u8());
        switch (kind)
        {
        case EventKind::PhotonArrival: {
            PhotonArrival p;
            p.session = r.u32();
            p.hop = r.u32();
            p.photon = r.u64();
            p.emitted_at = SimTime{r.u64()};
            e.payload = p;
            break;
        }
        case EventKind::ClassicalMessage: {
            ClassicalMessage p;
            p.session = r.u32();
            p.hop = r.u32();
            p.frame = r.u64();
            const std::uint8_t type = r.u8();
            if (type > 1)
                throw Error(ErrorCode::TransportFailure, "bad classical message type " + std::to_string(type));
            p.type = static_cast<ClassicalType>(type);
            e.payload = p;
            break;
        }
        case EventKind::ProtocolTimer: {
            ProtocolTimer p;
            p.session = r.u32();
            p.frame = r.u64();
            e.payload = p;
            break;
        }
        case EventKind::QsmBatchFlush:
            e.payload = QsmBatchFlush{r.u64()};
            break;
        default:
            throw Error(ErrorCode::TransportFailure, "bad event kind " + std::to_string(static_cast<int>(kind)));
        }
        return e;
    }

    inline std::vector<std::byte> encode_event_batch(WorkerId sender, std::span<const Event> events)
    {
        wire::Writer w;
        w.u32(sender);
        w.u32(static_cast<std::uint32_t>(events.size()));
        for (const Event& e : events)
            encode_event(w, e);
        return w.take();
    }

    inline std::pair<WorkerId, std::vector<Event>> decode_event_batch(std::span<const std::byte> payload)
    {
        wire::Reader r(payload);
        const WorkerId sender = r.u32();
        const std::uint32_t count = r.u32();
        std::vector<Event> events;
        events.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i)
            events.push_back(decode_event(r));
        if (!r.done())
            throw Error(ErrorCode::TransportFailure, "trailing bytes in EVENT_BATCH");
        return {sender, std::move(events)};
    }

    namespace detail
    {
        inline std::vector<std::byte> propose_payload(WorkerId rank, SimTime next, bool abort)
        {
            wire::Writer w;
            w.u32(rank);
            w.u64(next.ticks());
            w.u8(abort ? 1 : 0);
            return w.take();
        }

        inline void send(const net_io::Socket& s, SyncOpcode op, std::span<const std::byte> payload = {})
        {
            net_io::send_frame(s, static_cast<std::uint8_t>(op), payload);
        }
    } // namespace detail

    /// Rendezvous point for socket-connected workers. Runs on its own thread
    /// (or process); routes EVENT_BATCH contents by target ownership.
    class SyncHub
    {
    public:
        /// `owner[router]` is the worker that owns the router.
        SyncHub(std::size_t workers, std::vector<WorkerId> owner, const net_io::Endpoint& listen)
            : n_(workers), owner_(std::move(owner)), listener_(net_io::listen_on(listen))
        {
        }

        std::uint16_t port() const { return net_io::bound_port(listener_); }

        /// Accepts all workers and serves collectives until every worker sends DONE.
        void serve()
        {
            std::vector<net_io::Socket> pending;
            for (std::size_t i = 0; i < n_; ++i)
                pending.push_back(net_io::accept_one(listener_));
            listener_.close();

            // The first collective is a HORIZON_PROPOSE, which carries the rank.
            std::vector<wire::Frame> first(n_);
            conns_.resize(n_);
            for (auto& s : pending)
            {
                wire::Frame f = net_io::expect_frame(s, static_cast<std::uint8_t>(SyncOpcode::HorizonPropose), "HORIZON_PROPOSE");
                wire::Reader r(f.payload);
                const WorkerId rank = r.u32();
                if (rank >= n_ || conns_[rank].valid())
                    throw Error(ErrorCode::TransportFailure, "bad or duplicate worker rank " + std::to_string(rank));
                conns_[rank] = std::move(s);
                first[rank] = std::move(f);
            }

            std::vector<wire::Frame> round = std::move(first);
            try
            {
                while (true)
                {
                    const auto op = static_cast<SyncOpcode>(round[0].opcode);
                    for (const auto& f : round)
                        if (f.opcode != round[0].opcode)
                            throw Error(ErrorCode::TransportFailure, "workers out of lockstep");
                    if (op == SyncOpcode::Done)
                        return;
                    answer(op, round);
                    for (std::size_t w = 0; w < n_; ++w)
                        if (!net_io::recv_frame(conns_[w], round[w]))
                            throw Error(ErrorCode::TransportFailure, "worker " + std::to_string(w) + " disconnected");
                }
            }
            catch (...)
            {
                for (auto& s : conns_)
                    s.shutdown();
                throw;
            }
        }

        /// Unblocks a hub still waiting in accept.
        void cancel() noexcept
        {
            listener_.shutdown();
            for (auto& s : conns_)
                s.shutdown();
        }

    private:
        void answer(SyncOpcode op, const std::vector<wire::Frame>& round)
        {
            switch (op)
            {
            case SyncOpcode::Barrier:
                for (auto& s : conns_)
                    detail::send(s, SyncOpcode::BarrierRelease);
                break;
            case SyncOpcode::HorizonPropose: {
                SimTime m = kTimeInfinity;
                bool abort = false;
                for (const auto& f : round)
                {
                    wire::Reader r(f.payload);
                    r.u32();
                    m = std::min(m, SimTime{r.u64()});
                    abort = abort || r.u8() != 0;
                }
                wire::Writer w;
                w.u64(m.ticks());
                w.u8(abort ? 1 : 0);
                const auto payload = w.take();
                for (auto& s : conns_)
                    detail::send(s, SyncOpcode::HorizonCommit, payload);
                break;
            }
            case SyncOpcode::EventBatch: {
                // routed[to][from]
                std::vector<std::vector<std::vector<Event>>> routed(n_, std::vector<std::vector<Event>>(n_));
                for (std::size_t from = 0; from < n_; ++from)
                {
                    auto [sender, events] = decode_event_batch(round[from].payload);
                    if (sender != from)
                        throw Error(ErrorCode::TransportFailure, "EVENT_BATCH sender mismatch");
                    for (auto& e : events)
                    {
                        if (e.target >= owner_.size())
                            throw Error(ErrorCode::TransportFailure, "event for unknown entity " + std::to_string(e.target));
                        routed[owner_[e.target]][from].push_back(std::move(e));
                    }
                }
                for (std::size_t to = 0; to < n_; ++to)
                    for (std::size_t from = 0; from < n_; ++from)
                    {
                        if (from == to)
                            continue;
                        const auto payload = encode_event_batch(static_cast<WorkerId>(from), routed[to][from]);
                        detail::send(conns_[to], SyncOpcode::EventBatch, payload);
                    }
                break;
            }
            default:
                throw Error(ErrorCode::TransportFailure, "unexpected sync opcode " + std::to_string(static_cast<int>(op)));
            }
        }

        std::size_t n_;
        std::vector<WorkerId> owner_;
        net_io::Socket listener_;
        std::vector<net_io::Socket> conns_;
    };

    /// Worker side of the socket transport.
    class SocketExchange final : public Exchange
    {
    public:
        SocketExchange(WorkerId rank, std::size_t size, const net_io::Endpoint& hub)
            : rank_(rank), size_(size), socket_(net_io::connect_to(hub))
        {
        }

        WorkerId rank() const override { return rank_; }
        std::size_t size() const override { return size_; }

        SyncClock::time_point barrier() override
        {
            detail::send(socket_, SyncOpcode::Barrier);
            net_io::expect_frame(socket_, static_cast<std::uint8_t>(SyncOpcode::BarrierRelease), "BARRIER_RELEASE");
            return SyncClock::now();
        }

        std::vector<RemoteEventBatch> exchange(std::vector<RemoteEventBatch> outgoing) override
        {
            std::vector<Event> all;
            for (auto& b : outgoing)
                all.insert(all.end(), std::make_move_iterator(b.events.begin()), std::make_move_iterator(b.events.end()));
            detail::send(socket_, SyncOpcode::EventBatch, encode_event_batch(rank_, all));
            std::vector<RemoteEventBatch> in;
            for (std::size_t i = 0; i + 1 < size_; ++i)
            {
                const wire::Frame f = net_io::expect_frame(socket_, static_cast<std::uint8_t>(SyncOpcode::EventBatch), "EVENT_BATCH");
                auto [sender, events] = decode_event_batch(f.payload);
                in.push_back({sender, rank_, std::move(events)});
            }
            return in;
        }

        ReduceResult reduce(SimTime local_next, bool abort) override
        {
            detail::send(socket_, SyncOpcode::HorizonPropose, detail::propose_payload(rank_, local_next, abort));
            const wire::Frame f =
                net_io::expect_frame(socket_, static_cast<std::uint8_t>(SyncOpcode::HorizonCommit), "HORIZON_COMMIT");
            wire::Reader r(f.payload);
            ReduceResult out;
            out.min_next = SimTime{r.u64()};
            out.abort = r.u8() != 0;
            out.released_at = SyncClock::now();
            return out;
        }

        void finish() override { detail::send(socket_, SyncOpcode::Done); }

    private:
        WorkerId rank_;
        std::size_t size_;
        net_io::Socket socket_;
    };
} // namespace qnetsim::par
