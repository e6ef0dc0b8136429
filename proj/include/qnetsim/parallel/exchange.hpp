#pragma once

#include "qnetsim/error.hpp"
#include "qnetsim/event.hpp"
#include "qnetsim/timeline.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <sstream>
#include <tuple>
#include <vector>

namespace qnetsim::par
{
    /// Events one worker produced for another during an epoch.
    struct RemoteEventBatch
    {
        WorkerId from = 0;
        WorkerId to = 0;
        std::vector<Event> events;
    };

    using SyncClock = std::chrono::steady_clock;

    struct ReduceResult
    {
        SimTime min_next = kTimeInfinity;
        bool abort = false;
        SyncClock::time_point released_at{}; // when the rendezvous completed
    };

    /// Collective operations the epoch loop needs. Every worker calls them in
    /// the same order; each call is a rendezvous.
    class Exchange
    {
    public:
        virtual ~Exchange() = default;
        virtual WorkerId rank() const = 0;
        virtual std::size_t size() const = 0;
        /// Returns when the rendezvous completed.
        virtual SyncClock::time_point barrier() = 0;
        /// Sends `outgoing` and returns the batches addressed to this worker.
        virtual std::vector<RemoteEventBatch> exchange(std::vector<RemoteEventBatch> outgoing) = 0;
        /// Global minimum of next-event times; any abort flag aborts everyone.
        virtual ReduceResult reduce(SimTime local_next, bool abort) = 0;
        virtual void finish() {}
    };

    /// Inserts remote events into the local queue. Events are first put in
    /// (time, sender, sender seq) order so the outcome is independent of the
    /// order batches arrived in. Any event before the local clock is a
    /// causality violation and nothing is merged.
    inline std::size_t merge_remote_events(Timeline& timeline, std::vector<RemoteEventBatch> batches)
    {
        struct Item
        {
            Event* event;
            WorkerId from;
        };
        std::vector<Item> items;
        for (auto& b : batches)
            for (auto& e : b.events)
            {
                if (e.time < timeline.now())
                {
                    std::ostringstream msg;
                    msg << "event at " << e.time << " from worker " << b.from << " arrived after local time reached "
                        << timeline.now() << " (lookahead too large?)";
                    throw Error(ErrorCode::CausalityViolation, msg.str());
                }
                items.push_back({&e, b.from});
            }
        std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            return std::tie(a.event->time, a.from, a.event->seq) < std::tie(b.event->time, b.from, b.event->seq);
        });
        for (const Item& it : items)
            timeline.schedule_from(std::move(*it.event), it.from);
        return items.size();
    }

    /// Single worker: every collective is a no-op.
    class LocalExchange final : public Exchange
    {
    public:
        WorkerId rank() const override { return 0; }
        std::size_t size() const override { return 1; }
        SyncClock::time_point barrier() override { return SyncClock::now(); }
        std::vector<RemoteEventBatch> exchange(std::vector<RemoteEventBatch> outgoing) override
        {
            for (const auto& b : outgoing)
                if (!b.events.empty())
                    throw Error(ErrorCode::InvalidParameter, "single worker has no peers to send to");
            return {};
        }
        ReduceResult reduce(SimTime local_next, bool abort) override { return {local_next, abort, SyncClock::now()}; }
    };

    /// Shared state for workers running as threads of one process.
    class InProcFabric
    {
    public:
        explicit InProcFabric(std::size_t workers)
            : n_(workers), sync_(static_cast<std::ptrdiff_t>(workers), Stamp{this}), mail_(workers * workers), slots_(workers)
        {
        }

        class Endpoint final : public Exchange
        {
        public:
            Endpoint(InProcFabric& f, WorkerId rank) : f_(&f), rank_(rank) {}

            WorkerId rank() const override { return rank_; }
            std::size_t size() const override { return f_->n_; }

            SyncClock::time_point barrier() override { return f_->rendezvous(); }

            std::vector<RemoteEventBatch> exchange(std::vector<RemoteEventBatch> outgoing) override
            {
                for (auto& b : outgoing)
                {
                    auto& box = f_->box(b.to, rank_);
                    box.insert(box.end(), std::make_move_iterator(b.events.begin()), std::make_move_iterator(b.events.end()));
                }
                f_->rendezvous();
                std::vector<RemoteEventBatch> in;
                for (WorkerId s = 0; s < f_->n_; ++s)
                {
                    if (s == rank_)
                        continue;
                    auto& box = f_->box(rank_, s);
                    in.push_back({s, rank_, std::move(box)});
                    box.clear();
                }
                return in;
            }

            ReduceResult reduce(SimTime local_next, bool abort) override
            {
                f_->slots_[rank_] = {local_next, abort, {}};
                ReduceResult r;
                r.released_at = f_->rendezvous();
                for (const auto& s : f_->slots_)
                {
                    r.min_next = std::min(r.min_next, s.min_next);
                    r.abort = r.abort || s.abort;
                }
                return r;
            }

        private:
            InProcFabric* f_;
            WorkerId rank_;
        };

        Endpoint endpoint(WorkerId rank) { return Endpoint(*this, rank); }

    private:
        // Runs once per phase, in the last thread to arrive, before anyone is
        // released. Gives every worker the same release instant even when
        // some of them are not scheduled until much later.
        struct Stamp
        {
            InProcFabric* f;
            void operator()() noexcept { f->released_ = SyncClock::now(); }
        };

        SyncClock::time_point rendezvous()
        {
            sync_.arrive_and_wait();
            return released_;
        }

        std::vector<Event>& box(WorkerId to, WorkerId from) { return mail_[to * n_ + from]; }

        std::size_t n_;
        std::barrier<Stamp> sync_;
        SyncClock::time_point released_{};
        std::vector<std::vector<Event>> mail_; // [to][from]
        std::vector<ReduceResult> slots_;
    };
} // namespace qnetsim::par
