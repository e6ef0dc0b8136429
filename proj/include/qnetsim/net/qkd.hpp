#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/net/topology.hpp"
#include "qnetsim/qsm/hierarchy.hpp"
#include "qnetsim/rng.hpp"
#include "qnetsim/sim_time.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace qnetsim::net
{
    // Simplified BB84 over trusted relays. Per frame, per hop:
    //   timer (source)      emits frame_photons photons; survivors arrive one
    //                       hop later; announces the frame end classically
    //   photon arrival      Bell pair SET on the hop's two memories, receiver
    //                       measures its half, photon is relayed onward
    //   FrameEnd (receiver) sifts the frame, replies to the sender and
    //                       forwards the frame end to the next hop
    //   SiftReply (sender)  sender measures its halves and keeps matching bases
    // Every random choice comes from a stream keyed on (seed, session, hop,
    // photon), so results do not depend on how routers are spread over workers.

    enum class Role : std::uint8_t
    {
        Sender = 0,
        Receiver = 1,
    };

    /// router:20 | session:12 | photon:31 | role:1
    constexpr qsm::MemoryKey memory_key(EntityId router, std::uint32_t session, std::uint64_t photon, Role role) noexcept
    {
        return (static_cast<std::uint64_t>(router) << 44) | (static_cast<std::uint64_t>(session) << 32) |
               ((photon & 0x7fffffffULL) << 1) | static_cast<std::uint64_t>(role);
    }

    constexpr EntityId key_router(qsm::MemoryKey key) noexcept { return static_cast<EntityId>(key >> 44); }

    enum class Draw : std::uint64_t
    {
        Survival = 1,
        SenderBasis = 2,
        ReceiverBasis = 3,
        MeasureSender = 4,
        MeasureReceiver = 5,
    };

    struct LedgerId
    {
        std::uint32_t session = 0;
        std::uint32_t hop = 0;
        Role role = Role::Sender;
        auto operator<=>(const LedgerId&) const = default;
    };

    /// One endpoint's view of one hop of one session.
    struct HopLedger
    {
        std::map<std::uint64_t, std::uint8_t> outcomes;          // photon -> measured bit
        std::vector<std::uint64_t> sifted;                       // kept photons, ascending
        std::map<std::uint64_t, std::vector<std::uint64_t>> arrivals; // receiver only: frame -> photons
    };

    /// Per-router simulation state. Lives on exactly one worker.
    struct RouterState
    {
        explicit RouterState(EntityId router) : id(router) {}

        EntityId id;
        std::uint64_t created = 0; // events created here; source of causal seqs
        std::uint64_t executed = 0;
        std::uint64_t log_hash = 0x243f6a8885a308d3ULL;
        std::array<std::uint64_t, kEventKindCount> census{};
        std::map<LedgerId, HopLedger> ledgers;

        /// Folds an executed event into this router's execution log digest.
        void record(const Event& e)
        {
            ++executed;
            ++census[static_cast<std::size_t>(e.kind())];
            auto mix = [this](std::uint64_t v) { log_hash = splitmix64(log_hash ^ v); };
            mix(e.time.ticks());
            mix(e.seq);
            mix(static_cast<std::uint64_t>(e.kind()));
            std::visit(
                [&](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, PhotonArrival>)
                    {
                        mix(p.session);
                        mix(p.hop);
                        mix(p.photon);
                        mix(p.emitted_at.ticks());
                    }
                    else if constexpr (std::is_same_v<T, ClassicalMessage>)
                    {
                        mix(p.session);
                        mix(p.hop);
                        mix(p.frame);
                        mix(static_cast<std::uint64_t>(p.type));
                    }
                    else if constexpr (std::is_same_v<T, ProtocolTimer>)
                    {
                        mix(p.session);
                        mix(p.frame);
                    }
                    else
                        mix(p.epoch);
                },
                e.payload);
        }
    };

    /// What an event handler may touch outside its own router.
    class Context
    {
    public:
        virtual ~Context() = default;
        virtual SimTime now() const = 0;
        /// Delivers an event (seq already stamped) to its target, local or remote.
        virtual void send(Event e) = 0;
        virtual qsm::Hierarchy& qsm() = 0;
    };

    class QkdModel
    {
    public:
        QkdModel(const Topology& topology, std::uint64_t seed) : topology_(&topology), index_(topology), seed_(seed)
        {
            for (const auto& s : topology.sessions)
            {
                SessionInfo info;
                info.spec = &s;
                for (std::size_t h = 0; h + 1 < s.path.size(); ++h)
                {
                    const QChannel& q = topology.qchannels[*index_.qchannel(s.path[h], s.path[h + 1])];
                    const CChannel& c = topology.cchannels[*index_.cchannel(s.path[h], s.path[h + 1])];
                    info.hops.push_back({q.delay, c.delay, q.survival_probability()});
                }
                sessions_.emplace(s.id, std::move(info));
            }
        }

        const Topology& topology() const noexcept { return *topology_; }
        std::uint64_t seed() const noexcept { return seed_; }

        double draw(std::uint32_t session, std::uint32_t hop, std::uint64_t photon, Draw what) const noexcept
        {
            return to_unit_interval(derive_seed(seed_, {session, hop, photon, static_cast<std::uint64_t>(what)}));
        }

        bool survives(std::uint32_t session, std::uint32_t hop, std::uint64_t photon) const
        {
            return draw(session, hop, photon, Draw::Survival) < info(session).hops.at(hop).survival;
        }

        /// True when the photon survived hops 0..hop inclusive.
        bool reaches(std::uint32_t session, std::uint32_t hop, std::uint64_t photon) const
        {
            for (std::uint32_t h = 0; h <= hop; ++h)
                if (!survives(session, h, photon))
                    return false;
            return true;
        }

        bool bases_match(std::uint32_t session, std::uint32_t hop, std::uint64_t photon) const noexcept
        {
            const bool a = draw(session, hop, photon, Draw::SenderBasis) < 0.5;
            const bool b = draw(session, hop, photon, Draw::ReceiverBasis) < 0.5;
            return a == b;
        }

        /// Schedules each session's first frame timer at its source.
        void bootstrap(RouterState& router, Context& ctx) const
        {
            for (const auto& s : topology_->sessions)
                if (s.source() == router.id)
                    emit(router, ctx, Event{s.start, kUnsetSeq, router.id, ProtocolTimer{s.id, 0}});
        }

        void handle(RouterState& router, const Event& e, Context& ctx) const
        {
            router.record(e);
            std::visit(
                [&](const auto& p) {
                    using T = std::decay_t<decltype(p)>;
                    if constexpr (std::is_same_v<T, ProtocolTimer>)
                        on_timer(router, p, ctx);
                    else if constexpr (std::is_same_v<T, PhotonArrival>)
                        on_photon(router, p, ctx);
                    else if constexpr (std::is_same_v<T, ClassicalMessage>)
                    {
                        if (p.type == ClassicalType::FrameEnd)
                            on_frame_end(router, p, ctx);
                        else
                            on_sift_reply(router, p, ctx);
                    }
                    // QsmBatchFlush markers carry no protocol work.
                },
                e.payload);
        }

    private:
        struct HopInfo
        {
            SimTime qdelay;
            SimTime cdelay;
            double survival;
        };

        struct SessionInfo
        {
            const SessionSpec* spec = nullptr;
            std::vector<HopInfo> hops;
        };

        const SessionInfo& info(std::uint32_t session) const
        {
            auto it = sessions_.find(session);
            if (it == sessions_.end())
                throw Error(ErrorCode::UnknownSession, "session " + std::to_string(session));
            return it->second;
        }

        const SessionInfo& expect_at(std::uint32_t session, std::size_t position, EntityId router) const
        {
            const SessionInfo& si = info(session);
            if (position >= si.spec->path.size() || si.spec->path[position] != router)
                throw Error(ErrorCode::UnknownSession, "router " + std::to_string(router) + " is not at position " +
                                                           std::to_string(position) + " of session " +
                                                           std::to_string(session));
            return si;
        }

        static void emit(RouterState& origin, Context& ctx, Event e)
        {
            e.seq = make_causal_seq(origin.id, origin.created++);
            ctx.send(std::move(e));
        }

        void on_timer(RouterState& router, const ProtocolTimer& p, Context& ctx) const
        {
            const SessionInfo& si = expect_at(p.session, 0, router.id);
            const SessionSpec& s = *si.spec;
            const HopInfo& hop = si.hops.front();
            const SimTime t = ctx.now();
            const std::uint64_t first = p.frame * s.frame_photons;
            for (std::uint32_t i = 0; i < s.frame_photons; ++i)
            {
                const std::uint64_t photon = first + i;
                if (!survives(s.id, 0, photon))
                    continue;
                const SimTime emitted = t + SimTime{s.period.ticks() * i};
                emit(router, ctx, Event{emitted + hop.qdelay, kUnsetSeq, s.path[1], PhotonArrival{s.id, 0, photon, emitted}});
            }
            const SimTime frame_end = t + SimTime{s.period.ticks() * s.frame_photons};
            emit(router, ctx,
                 Event{frame_end + hop.cdelay, kUnsetSeq, s.path[1], ClassicalMessage{s.id, 0, p.frame, ClassicalType::FrameEnd}});

            const HopLedger& mine = router.ledgers[LedgerId{s.id, 0, Role::Sender}];
            if (p.frame + 1 < s.max_frames && mine.sifted.size() < s.target_bits)
                emit(router, ctx, Event{frame_end, kUnsetSeq, router.id, ProtocolTimer{s.id, p.frame + 1}});
        }

        void on_photon(RouterState& router, const PhotonArrival& p, Context& ctx) const
        {
            const SessionInfo& si = expect_at(p.session, std::size_t{p.hop} + 1, router.id);
            const SessionSpec& s = *si.spec;
            if (ctx.now() != p.emitted_at + si.hops[p.hop].qdelay)
                throw std::logic_error("photon arrival time drifted from emission + channel delay");

            const EntityId sender = s.path[p.hop];
            const qsm::MemoryKey ks = memory_key(sender, s.id, p.photon, Role::Sender);
            const qsm::MemoryKey kr = memory_key(router.id, s.id, p.photon, Role::Receiver);
            const double h = 1.0 / std::sqrt(2.0);
            ctx.qsm().submit(qsm::Request::set({ks, kr}, {h, 0.0, 0.0, h}));

            HopLedger& ledger = router.ledgers[LedgerId{s.id, p.hop, Role::Receiver}];
            const std::uint64_t photon = p.photon;
            ctx.qsm().submit(qsm::Request::measure(kr, draw(s.id, p.hop, photon, Draw::MeasureReceiver)),
                             [&ledger, photon](const qsm::Response& r) {
                                 if (r.status == qsm::Status::Ok)
                                     ledger.outcomes[photon] = r.outcome;
                             });
            ledger.arrivals[photon / s.frame_photons].push_back(photon);

            const std::uint32_t next = p.hop + 1;
            if (next < si.hops.size() && survives(s.id, next, photon))
                emit(router, ctx,
                     Event{ctx.now() + si.hops[next].qdelay, kUnsetSeq, s.path[next + 1],
                           PhotonArrival{s.id, next, photon, ctx.now()}});
        }

        void on_frame_end(RouterState& router, const ClassicalMessage& m, Context& ctx) const
        {
            const SessionInfo& si = expect_at(m.session, std::size_t{m.hop} + 1, router.id);
            const SessionSpec& s = *si.spec;
            HopLedger& ledger = router.ledgers[LedgerId{s.id, m.hop, Role::Receiver}];
            if (auto it = ledger.arrivals.find(m.frame); it != ledger.arrivals.end())
            {
                for (std::uint64_t photon : it->second)
                    if (bases_match(s.id, m.hop, photon))
                        ledger.sifted.push_back(photon);
                ledger.arrivals.erase(it);
            }
            emit(router, ctx,
                 Event{ctx.now() + si.hops[m.hop].cdelay, kUnsetSeq, s.path[m.hop],
                       ClassicalMessage{s.id, m.hop, m.frame, ClassicalType::SiftReply}});
            const std::uint32_t next = m.hop + 1;
            if (next < si.hops.size())
                emit(router, ctx,
                     Event{ctx.now() + si.hops[next].cdelay, kUnsetSeq, s.path[next + 1],
                           ClassicalMessage{s.id, next, m.frame, ClassicalType::FrameEnd}});
        }

        void on_sift_reply(RouterState& router, const ClassicalMessage& m, Context& ctx) const
        {
            const SessionInfo& si = expect_at(m.session, m.hop, router.id);
            const SessionSpec& s = *si.spec;
            HopLedger& ledger = router.ledgers[LedgerId{s.id, m.hop, Role::Sender}];
            const std::uint64_t first = m.frame * s.frame_photons;
            for (std::uint64_t photon = first; photon < first + s.frame_photons; ++photon)
            {
                if (!reaches(s.id, m.hop, photon))
                    continue;
                const qsm::MemoryKey ks = memory_key(router.id, s.id, photon, Role::Sender);
                ctx.qsm().submit(qsm::Request::measure(ks, draw(s.id, m.hop, photon, Draw::MeasureSender)),
                                 [&ledger, photon](const qsm::Response& r) {
                                     if (r.status == qsm::Status::Ok)
                                         ledger.outcomes[photon] = r.outcome;
                                 });
                if (bases_match(s.id, m.hop, photon))
                    ledger.sifted.push_back(photon);
            }
        }

        const Topology* topology_;
        TopologyIndex index_;
        std::uint64_t seed_;
        std::map<std::uint32_t, SessionInfo> sessions_;
    };
} // namespace qnetsim::net
